//! Source-free mixing: decay of `g_t = S^κ_t g₀` along the stochastic flow,
//! with the `u ≡ 0` heat flow as control.

use std::path::Path;

use bspc_core::fluid::{FluidState, FluidStepper};
use bspc_core::forcing::{purpose, NoiseStream};
use bspc_core::scalar::{
    half_life_from_samples, norm_sample, FluidPath, FrozenVelocity, HalfLife, NormSample, ScalarState, ScalarStepper,
    VelocityPath,
};
use bspc_core::spectral::{Grid, SpectralField};
use bspc_core::stats::linear_fit;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{kappa_dir, RunManifest, Stat, Table};
use crate::{row, HarnessError};

/// Exponential fit of `‖g_t‖_{H⁻¹}` over the samples whose ratio to the
/// initial value lies in `[floor, ceiling]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub rate_se: f64,
    pub r2: f64,
    pub t0: f64,
    pub t1: f64,
    pub points: usize,
}

pub fn fit_decay_rate(samples: &[NormSample], floor: f64, ceiling: f64) -> RateFit {
    let h0 = samples.first().map(|s| s.hm1).unwrap_or(f64::NAN);
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for s in samples {
        let r = s.hm1 / h0;
        if r <= ceiling && r >= floor {
            t.push(s.t);
            y.push(r.ln());
        }
    }
    let points = t.len();
    let (t0, t1) = (t.first().copied().unwrap_or(f64::NAN), t.last().copied().unwrap_or(f64::NAN));
    match (points >= 3).then(|| linear_fit(&t, &y)).flatten() {
        Some(f) => RateFit { rate: -f.slope, rate_se: f.slope_se, r2: f.r2, t0, t1, points },
        None => RateFit { rate: f64::NAN, rate_se: f64::NAN, r2: f64::NAN, t0, t1, points },
    }
}

/// Copies the modes of `g` that fit on `grid`.
fn resample(g: &SpectralField, grid: &Grid) -> SpectralField {
    let mut out = SpectralField::scalar(grid);
    for s in 0..grid.spectral_len() {
        if grid.is_dealiased(s) {
            let w = grid.wave(s);
            out.comp_mut(0)[s] = g.coeff(0, [w[0] as i64, w[1] as i64, w[2] as i64]);
        }
    }
    out
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let ok: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    let n = ok.len() as f64;
    if ok.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = ok.iter().sum::<f64>() / n;
    let se =
        if ok.len() > 1 { (ok.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt() } else { f64::NAN };
    (m, se)
}

fn tau_of(h: HalfLife) -> (f64, bool, f64) {
    match h {
        HalfLife::Reached(t) => (t, true, 0.5),
        HalfLife::NotReached { final_ratio } => (f64::NAN, false, final_ratio),
    }
}

struct Run {
    kappa: f64,
    stepper: ScalarStepper,
    state: ScalarState,
    samples: Vec<NormSample>,
}

/// Runs the mixing protocol: spin-up, then `ensemble_size` consecutive
/// windows of one fluid trajectory, each restarting every diffusivity
/// from `g₀`; then the `u ≡ 0` control.
pub fn run_mixing(cfg: &RunConfig, out: &Path) -> Result<RunManifest, HarnessError> {
    let mut manifest = RunManifest::new("mix", cfg.hash(), cfg.seed, cfg.canonical());
    manifest.warnings.extend(cfg.warnings.iter().cloned());
    manifest.streams.push(("fluid".into(), format!("{} {} 0", cfg.seed, purpose::FLUID)));
    manifest.streams.push(("initial".into(), format!("{} {} <member>", cfg.seed, purpose::INITIAL)));
    let grid = &cfg.grid;
    let mix = &cfg.mix;
    let stepper = FluidStepper::new(
        cfg.model.clone(),
        grid,
        Some(cfg.forcing.clone()),
        cfg.dt,
        NoiseStream::derive(cfg.seed, purpose::FLUID, 0),
    )?;
    let mut fstate = FluidState::at_rest(grid);
    if matches!(cfg.model.kind, bspc_core::fluid::FluidKind::OuTower(_)) {
        fstate.z = stepper.initial_tower();
    }
    let mut path = FluidPath::new(stepper, fstate);
    let mut counter = 0u64;
    for _ in 0..cfg.steps_for(mix.t_spinup) {
        path.advance()?;
        counter += 1;
    }

    let pool = crate::thread_pool();
    let every = cfg.steps_for(mix.sample_interval);
    let max_steps = cfg.steps_for(mix.t_mix);
    let mut curves = Table::new(&["kind", "kappa", "member", "t", "L2", "H1", "Hm1", "mean"]);
    let mut rates = Table::new(&["kind", "kappa", "member", "rate", "rate_se", "r2", "t0", "t1", "points"]);
    let mut halves = Table::new(&["kind", "kappa", "member", "tau", "reached", "final_ratio"]);
    let mut per_kappa: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); cfg.kappas.len()];
    let mut g0s = Vec::new();

    for member in 0..cfg.ensemble_size {
        let mut init = NoiseStream::derive(cfg.seed, purpose::INITIAL, member as u64);
        let g0 = cfg.g0.build(grid, &mut init);
        let mut runs = cfg
            .kappas
            .iter()
            .map(|&kappa| {
                Ok(Run {
                    kappa,
                    stepper: ScalarStepper::new(grid, kappa, cfg.dt, None, NoiseStream::new(0, 0))?
                        .with_cfl(cfg.model.cfl),
                    state: ScalarState::new(g0.clone(), kappa, false),
                    samples: vec![norm_sample(0.0, &g0)],
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let mut prev = path.current().to_vec();
        for i in 1..=max_steps {
            path.advance()?;
            counter += 1;
            let cur = path.current();
            pool.install(|| {
                runs.par_iter_mut().try_for_each(|r| -> Result<(), HarnessError> {
                    r.stepper.step(&mut r.state, &prev, cur)?;
                    if i % every == 0 || i == max_steps {
                        r.samples.push(norm_sample(i as f64 * cfg.dt, &r.state.g));
                    }
                    Ok(())
                })
            })?;
            prev.clone_from_slice(cur);
            // stop once every diffusivity has halved and left the fit window
            if i % every == 0
                && runs.iter().all(|r| {
                    let (s0, s) = (&r.samples[0], r.samples.last().unwrap());
                    s.l2 < 0.5 * s0.l2 && s.hm1 < mix.fit_floor * s0.hm1
                })
            {
                break;
            }
        }
        for (r, acc) in runs.iter().zip(per_kappa.iter_mut()) {
            for s in &r.samples {
                curves.push(row!["flow", r.kappa, member, s.t, s.l2, s.h1, s.hm1, s.mean]);
            }
            let fit = fit_decay_rate(&r.samples, mix.fit_floor, mix.fit_ceiling);
            if fit.rate.is_nan() {
                manifest
                    .warnings
                    .push(format!("kappa {:e} member {member}: too few samples in the H^-1 fit window", r.kappa));
            }
            rates.push(row!["flow", r.kappa, member, fit.rate, fit.rate_se, fit.r2, fit.t0, fit.t1, fit.points]);
            let (tau, reached, ratio) = tau_of(half_life_from_samples(&r.samples));
            if !reached {
                manifest
                    .warnings
                    .push(format!("kappa {:e} member {member}: L2 did not halve within mix.t_mix", r.kappa));
            }
            halves.push(row!["flow", r.kappa, member, tau, reached, ratio]);
            acc.0.push(fit.rate);
            acc.1.push(tau);
        }
        g0s.push(g0);
    }
    let t_end = counter as f64 * cfg.dt;
    for (&kappa, (r, t)) in cfg.kappas.iter().zip(&per_kappa) {
        let dir = kappa_dir(kappa);
        let (rm, rse) = mean_se(r);
        let (tm, tse) = mean_se(t);
        rates.push(row!["flow", kappa, "all", rm, rse, f64::NAN, f64::NAN, f64::NAN, r.len()]);
        halves.push(row!["flow", kappa, "all", tm, t.iter().all(|x| x.is_finite()), f64::NAN]);
        manifest.stat(format!("{dir}.rate"), Stat { mean: rm, stderr: rse, t0: 0.0, t1: t_end, samples: r.len() });
        manifest.stat(format!("{dir}.tau"), Stat { mean: tm, stderr: tse, t0: 0.0, t1: t_end, samples: t.len() });
    }

    // u ≡ 0: the integrating factor is exact, so the step only sets the sampling
    let cgrid = Grid::new(grid.dim(), mix.control_n)?;
    let g0 = resample(&g0s[0], &cgrid);
    for &kappa in &cfg.kappas {
        let dt = mix.control_dt / kappa;
        let steps = (mix.control_t_max / mix.control_dt).round().max(1.0) as u64;
        let mut zero = FrozenVelocity::zero(&cgrid, dt);
        let mut stepper = ScalarStepper::new(&cgrid, kappa, dt, None, NoiseStream::new(0, 0))?;
        let mut state = ScalarState::new(g0.clone(), kappa, false);
        let mut samples = vec![norm_sample(0.0, &g0)];
        for _ in 0..steps {
            zero.advance()?;
            stepper.step(&mut state, zero.current(), zero.current())?;
            samples.push(norm_sample(state.t, &state.g));
        }
        for s in &samples {
            curves.push(row!["control", kappa, 0usize, s.t, s.l2, s.h1, s.hm1, s.mean]);
        }
        let fit = fit_decay_rate(&samples, mix.fit_floor, mix.fit_ceiling);
        rates.push(row!["control", kappa, 0usize, fit.rate, fit.rate_se, fit.r2, fit.t0, fit.t1, fit.points]);
        let (tau, reached, ratio) = tau_of(half_life_from_samples(&samples));
        halves.push(row!["control", kappa, 0usize, tau, reached, ratio]);
        let dir = kappa_dir(kappa);
        let t1 = steps as f64 * dt;
        manifest.stat(
            format!("control.{dir}.rate"),
            Stat { mean: fit.rate, stderr: fit.rate_se, t0: 0.0, t1, samples: fit.points },
        );
        manifest
            .stat(format!("control.{dir}.tau"), Stat { mean: tau, stderr: 0.0, t0: 0.0, t1, samples: samples.len() });
    }

    manifest.write_table(out, "mixing.csv", &curves, counter)?;
    manifest.write_table(out, "rates.csv", &rates, counter)?;
    manifest.write_table(out, "halflife.csv", &halves, counter)?;
    manifest.save(out)?;
    Ok(manifest)
}
