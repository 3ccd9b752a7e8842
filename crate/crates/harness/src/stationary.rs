//! Stationary statistics: burn-in, then time averages of the diagnostics
//! along one fluid trajectory shared by every diffusivity of the sweep.

use std::path::{Path, PathBuf};

use bspc_core::diagnostics::{
    besov_from_shells, budget_terms, dyadic_levels, flux_budget, radial_cumulative, yaglom_target, BesovMultiplier,
    Cutoff, SpectrumSeries, YaglomKernel,
};
use bspc_core::fluid::{FluidState, FluidStepper};
use bspc_core::forcing::{purpose, NoiseStream};
use bspc_core::scalar::{norm_sample, ScalarState, ScalarStepper};
use bspc_core::spectral::{save_snapshot, SpectralField, Transform};
use bspc_core::stats::{batch_means, split_half_drift, DriftTest};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{kappa_dir, RunManifest, Stat, Table};
use crate::{row, HarnessError, BATCHES};

/// One diffusivity: its stepper, state and accumulated samples.
struct Member {
    kappa: f64,
    stepper: ScalarStepper,
    state: ScalarState,
    /// scalar at the start of the current step
    prev_g: SpectralField,
    /// per-step sums over the current diagnostic block: flux and κ‖∇Πg‖²
    /// per cutoff, then the uncut κ‖∇g‖²
    block: Vec<(f64, f64)>,
    block_grad: f64,
    block_steps: u64,
    series: Table,
    times: Vec<f64>,
    balance: Vec<f64>,
    l2sq: Vec<f64>,
    /// `[N][sample]`
    radial: Vec<Vec<f64>>,
    /// `[cutoff][sample]`
    flux: Vec<Vec<f64>>,
    kappa_grad: Vec<Vec<f64>>,
    half_b: Vec<f64>,
    /// `[ell][sample]`
    yaglom: Vec<Vec<f64>>,
}

pub(crate) fn stat(series: &[f64], t0: f64, t1: f64) -> Stat {
    let bm = batch_means(series, BATCHES);
    Stat { mean: bm.mean, stderr: bm.stderr, t0, t1, samples: series.len() }
}

impl Member {
    /// Advances one step; while averaging, adds the budget terms of the
    /// step's initial state to the running block.
    fn step(&mut self, cfg: &RunConfig, u0: &[Vec<f64>], u1: &[Vec<f64>], averaging: bool) -> Result<(), HarnessError> {
        if averaging {
            self.prev_g.clone_from(&self.state.g);
        }
        self.stepper.step(&mut self.state, u0, u1)?;
        if averaging {
            let cutoff = if cfg.smooth_cutoff { Cutoff::Smooth } else { Cutoff::Sharp };
            let (terms, total) =
                budget_terms(&self.prev_g, self.stepper.last_advection(), self.kappa, &cfg.flux_n, cutoff);
            for (acc, t) in self.block.iter_mut().zip(terms) {
                acc.0 += t.0;
                acc.1 += t.1;
            }
            self.block_grad += total;
            self.block_steps += 1;
        }
        Ok(())
    }

    fn sample(&mut self, cfg: &RunConfig, u: &SpectralField, step: u64, averaging: bool) {
        let g = &self.state.g;
        let chi = cfg.source.chi();
        let t = step as f64 * cfg.dt;
        let ns = norm_sample(t, g);
        let bal = 2.0 * self.kappa * ns.grad2 / chi;
        self.series.push(row![step, t, ns.l2, ns.h1, ns.hm1, ns.mean, bal, averaging]);
        if !averaging || self.block_steps == 0 {
            return;
        }
        let steps = self.block_steps as f64;
        self.times.push(t);
        self.balance.push(2.0 * self.block_grad / steps / chi);
        for (i, b) in self.block.iter_mut().enumerate() {
            self.flux[i].push(b.0 / steps);
            self.kappa_grad[i].push(b.1 / steps);
            *b = (0.0, 0.0);
        }
        self.block_grad = 0.0;
        self.block_steps = 0;
        self.l2sq.push(ns.l2 * ns.l2);
        let radial = radial_cumulative(g);
        if self.radial.is_empty() {
            self.radial = vec![Vec::new(); radial.len()];
        }
        for (acc, v) in self.radial.iter_mut().zip(radial) {
            acc.push(v);
        }
        if !cfg.yaglom_ell.is_empty() {
            let kernel = YaglomKernel::new(u, g);
            for (i, &ell) in cfg.yaglom_ell.iter().enumerate() {
                self.yaglom[i].push(kernel.flux(ell, cfg.yaglom_angles.max(8)).unwrap_or(f64::NAN));
            }
        }
    }
}

fn save_checkpoint(dir: &Path, u: &SpectralField, members: &[Member], tag: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    save_snapshot(dir.join(format!("u_{tag}.bspc")), u)?;
    for m in members {
        save_snapshot(dir.join(format!("g_{}_{tag}.bspc", kappa_dir(m.kappa))), &m.state.g)?;
    }
    Ok(())
}

/// Runs the stationary protocol and writes CSVs, snapshots and the manifest
/// under `out`.
pub fn run_stationary(cfg: &RunConfig, out: &Path) -> Result<RunManifest, HarnessError> {
    let mut manifest = RunManifest::new("simulate", cfg.hash(), cfg.seed, cfg.canonical());
    manifest.warnings.extend(cfg.warnings.iter().cloned());
    manifest.streams.push(("fluid".into(), format!("{} {} 0", cfg.seed, purpose::FLUID)));
    manifest.streams.push(("source".into(), format!("{} {} 0", cfg.seed, purpose::SOURCE)));

    let grid = &cfg.grid;
    let mut fluid = FluidStepper::new(
        cfg.model.clone(),
        grid,
        Some(cfg.forcing.clone()),
        cfg.dt,
        NoiseStream::derive(cfg.seed, purpose::FLUID, 0),
    )?;
    let mut fstate = FluidState::at_rest(grid);
    if matches!(cfg.model.kind, bspc_core::fluid::FluidKind::OuTower(_)) {
        fstate.z = fluid.initial_tower();
    }
    let mut members = Vec::new();
    for &kappa in &cfg.kappas {
        // every diffusivity sees the same source path
        let source = cfg.source_on.then(|| cfg.source.clone());
        let stepper =
            ScalarStepper::new(grid, kappa, cfg.dt, source, NoiseStream::derive(cfg.seed, purpose::SOURCE, 0))?
                .with_cfl(cfg.model.cfl);
        members.push(Member {
            kappa,
            stepper,
            state: ScalarState::new(SpectralField::scalar(grid), kappa, cfg.source_on),
            prev_g: SpectralField::scalar(grid),
            block: vec![(0.0, 0.0); cfg.flux_n.len()],
            block_grad: 0.0,
            block_steps: 0,
            series: Table::new(&["step", "t", "L2", "H1", "Hm1", "mean", "balance", "averaging"]),
            times: Vec::new(),
            balance: Vec::new(),
            l2sq: Vec::new(),
            radial: Vec::new(),
            flux: vec![Vec::new(); cfg.flux_n.len()],
            kappa_grad: vec![Vec::new(); cfg.flux_n.len()],
            half_b: cfg
                .flux_n
                .iter()
                .map(|&n| {
                    let cutoff = if cfg.smooth_cutoff { Cutoff::Smooth } else { Cutoff::Sharp };
                    let zero = SpectralField::scalar(grid);
                    flux_budget(&zero, &zero, cfg.source.b(), kappa, n, cutoff).half_b
                })
                .collect(),
            yaglom: vec![Vec::new(); cfg.yaglom_ell.len()],
        });
    }

    let burn = cfg.steps_for(cfg.t_burn);
    let total = burn + cfg.steps_for(cfg.t_average);
    let every = cfg.steps_for(cfg.diag_interval);
    let checkpoint = cfg.steps_for(cfg.checkpoint_interval);
    let snap_dir = out.join("snapshots");
    let pool = crate::thread_pool();
    let mut transform = Transform::new(grid);
    let mut prev = transform.backward_field(&fstate.u);
    let mut cur = prev.clone();
    let mut last_good: Option<PathBuf> = None;

    let fail = |e: HarnessError, last: &Option<PathBuf>| match last {
        Some(p) => HarnessError::Aborted { source: Box::new(e), snapshot: p.clone() },
        None => e,
    };
    for step in 1..=total {
        if let Err(e) = fluid.step(&mut fstate) {
            return Err(fail(e.into(), &last_good));
        }
        for (j, c) in cur.iter_mut().enumerate() {
            transform.backward(fstate.u.comp(j), c)?;
        }
        let averaging = step > burn;
        let res: Result<(), HarnessError> =
            pool.install(|| members.par_iter_mut().try_for_each(|m| m.step(cfg, &prev, &cur, averaging)));
        if let Err(e) = res {
            return Err(fail(e, &last_good));
        }
        std::mem::swap(&mut prev, &mut cur);
        if step % every == 0 {
            pool.install(|| members.par_iter_mut().for_each(|m| m.sample(cfg, &fstate.u, step, averaging)));
        }
        if step % checkpoint == 0 || step == total {
            if !fstate.u.is_finite() || members.iter().any(|m| !m.state.g.is_finite()) {
                let e = HarnessError::NotFinite { t: step as f64 * cfg.dt };
                return Err(fail(e, &last_good));
            }
            save_checkpoint(&snap_dir, &fstate.u, &members, "last")?;
            last_good = Some(snap_dir.clone());
        }
    }
    save_checkpoint(&snap_dir, &fstate.u, &members, "final")?;

    let t1 = total as f64 * cfg.dt;
    let t0 = burn as f64 * cfg.dt;
    let multiplier = BesovMultiplier::log_default(4 * grid.n());
    multiplier.check(2.0)?;
    let mut sweep =
        Table::new(&["kappa", "abs_log_kappa", "l2sq", "l2sq_se", "balance", "balance_se", "besov", "drifted"]);
    for m in &members {
        let dir = kappa_dir(m.kappa);
        let name = |s: &str| format!("{dir}.{s}");
        manifest.write_table(out, &format!("{dir}/timeseries.csv"), &m.series, total)?;

        let balance = stat(&m.balance, t0, t1);
        let l2sq = stat(&m.l2sq, t0, t1);
        manifest.stat(name("balance"), balance);
        manifest.stat(name("l2sq"), l2sq);
        let drift: DriftTest = split_half_drift(&m.balance);
        manifest.flag(
            name("drift"),
            format!(
                "{} {:?} {:?} {:?}",
                if drift.drifted { "drifted" } else { "ok" },
                drift.first_half,
                drift.second_half,
                drift.sigma
            ),
        );
        let mut bt = Table::new(&[
            "t0",
            "t1",
            "balance",
            "balance_se",
            "l2sq",
            "l2sq_se",
            "drift_first",
            "drift_second",
            "drift_sigma",
            "drifted",
        ]);
        bt.push(row![
            t0,
            t1,
            balance.mean,
            balance.stderr,
            l2sq.mean,
            l2sq.stderr,
            drift.first_half,
            drift.second_half,
            drift.sigma,
            drift.drifted
        ]);
        manifest.write_table(out, &format!("{dir}/balance.csv"), &bt, total)?;

        let radial: Vec<Stat> = m.radial.iter().map(|s| stat(s, t0, t1)).collect();
        let mut st = Table::new(&["t", "N", "cumulative", "shell", "cumulative_se"]);
        for (n, s) in radial.iter().enumerate() {
            let shell = if n == 0 { s.mean } else { s.mean - radial[n - 1].mean };
            st.push(row![t1, n, s.mean, shell, s.stderr]);
        }
        manifest.write_table(out, &format!("{dir}/spectrum.csv"), &st, total)?;

        let mut ft = Table::new(&[
            "t",
            "N",
            "flux",
            "kappa_gradN",
            "half_bN",
            "flux_se",
            "kappa_grad_se",
            "budget_ratio",
            "budget_ratio_se",
        ]);
        for (i, &n) in cfg.flux_n.iter().enumerate() {
            let f = stat(&m.flux[i], t0, t1);
            let k = stat(&m.kappa_grad[i], t0, t1);
            let hb = m.half_b[i];
            let ratio: Vec<f64> = m.flux[i].iter().zip(&m.kappa_grad[i]).map(|(a, b)| (a + b) / hb).collect();
            let r = stat(&ratio, t0, t1);
            manifest.stat(name(&format!("flux_{n}")), f);
            manifest.stat(name(&format!("budget_{n}")), r);
            ft.push(row![t1, n, f.mean, k.mean, hb, f.stderr, k.stderr, r.mean, r.stderr]);
        }
        manifest.write_table(out, &format!("{dir}/flux.csv"), &ft, total)?;

        let target = yaglom_target(grid, cfg.source.chi());
        let mut yt = Table::new(&["t", "ell", "flux", "target", "flux_se", "ratio"]);
        for (i, &ell) in cfg.yaglom_ell.iter().enumerate() {
            let y = stat(&m.yaglom[i], t0, t1);
            yt.push(row![t1, ell, y.mean, target, y.stderr, y.mean / target]);
        }
        manifest.write_table(out, &format!("{dir}/yaglom.csv"), &yt, total)?;

        let mean_radial: Vec<f64> = radial.iter().map(|s| s.mean).collect();
        let series = SpectrumSeries::from_radial(t1, &mean_radial, &dyadic_levels(grid));
        let besov = besov_from_shells(&series.levels, &series.shell, &multiplier);
        let mut bs = Table::new(&["t", "N", "shell", "multiplier", "weighted", "norm"]);
        for (&n, &e) in series.levels.iter().zip(&series.shell) {
            let mn = multiplier.at(n as usize);
            bs.push(row![t1, n, e, mn, mn * e.max(0.0).sqrt(), besov]);
        }
        manifest.write_table(out, &format!("{dir}/besov.csv"), &bs, total)?;
        manifest.stat(name("besov"), Stat { mean: besov, stderr: f64::NAN, t0, t1, samples: m.times.len() });

        sweep.push(row![
            m.kappa,
            m.kappa.ln().abs(),
            l2sq.mean,
            l2sq.stderr,
            balance.mean,
            balance.stderr,
            besov,
            drift.drifted
        ]);
    }
    manifest.write_table(out, "sweep.csv", &sweep, total)?;
    manifest.save(out)?;
    Ok(manifest)
}
