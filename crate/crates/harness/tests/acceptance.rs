//! Acceptance suite at desk scale (d = 2, n = 256, nu = 0.1, alpha = 5.5).
//!
//! Each test prints one `PASS`/`FAIL` line. The long runs are cached under
//! the cargo target tmpdir, keyed by configuration hash; set
//! `BSPC_ACCEPTANCE_RECOMPUTE=1` to rerun them. A `FAIL` line fails the test
//! only when `BSPC_ACCEPTANCE_STRICT=1`. Single-core wall times are
//! roughly 70 min (stationary), 90 min (mixing) and 8 min (Lyapunov).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use bspc::config::RunConfig;
use bspc::output::{kappa_dir, RunManifest, Table};
use bspc::run_command;
use bspc_core::diagnostics::{spectral_flux, Cutoff, YaglomKernel};
use bspc_core::fluid::{FluidKind, FluidModel, FluidState, FluidStepper};
use bspc_core::forcing::{purpose, ForcingSpec, ModeSet, NoiseStream};
use bspc_core::lagrangian::{estimate_lyapunov, LagrangianTracker, ParticleEnsemble};
use bspc_core::spectral::{
    galerkin_projection, project_leray, transform_backward, transform_forward, Complex64, Grid, SpectralField,
    Transform,
};
use bspc_core::stats::{batch_means, linear_fit};
use bspc_core::toy::{cumulative_mass_between, power_spectral_density, StrainModel};

// ---- pinned thresholds

const TOY_BAND: (f64, f64) = (0.95, 1.05);
const TOY_FTC_TOL: f64 = 1e-6;
const TOY_SECONDS: f64 = 1.0;
const BALANCE_TOL: f64 = 0.1;
const CUMULATIVE_R2: f64 = 0.95;
const SHELL_SPREAD: f64 = 0.35;
const L2_SWEEP_R2: f64 = 0.9;
const BUDGET_TOL: f64 = 0.1;
const FLUX_ALONE_TOL: f64 = 0.2;
const FLUX_CUTOFFS: [f64; 3] = [8.0, 16.0, 32.0];
const STRAIN_TOL: f64 = 0.01;
const RATE_FACTOR: f64 = 2.0;
const CONTROL_TOL: f64 = 0.01;
const TAU_R2: f64 = 0.9;
const CONTROL_SLOPE_TOL: f64 = 0.02;
const YAGLOM_BAND: (f64, f64) = (0.6, 1.4);
const YAGLOM_DECADES: f64 = 0.5;
const FLUX_ORACLE_TOL: f64 = 1e-12;
const YAGLOM_ORACLE_TOL: f64 = 1e-10;
const ROUND_TRIP_TOL: f64 = 1e-12;
const STOKES_SIGMAS: f64 = 3.0;

// ---- pinned run configurations

const STATIONARY: &str = "
scalar.allow_underresolved = true
t_burn = 15
t_average = 60
";

const MIXING: &str = "
scalar.allow_underresolved = true
";

const LYAPUNOV: &str = "
scalar.allow_underresolved = true
kappa_sweep = 1e-3
";

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {criterion:>2} {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    println!("{line}");
    static LOG: Mutex<()> = Mutex::new(());
    let _g = LOG.lock().unwrap();
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_summary.txt");
    let mut lines: Vec<String> = std::fs::read_to_string(&path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.starts_with(&format!("criterion {criterion:>2} ")))
        .map(String::from)
        .collect();
    lines.push(line);
    lines.sort();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
}

/// Reports, then fails the test on `FAIL` only under `BSPC_ACCEPTANCE_STRICT=1`.
fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    report(criterion, name, pass, detail);
    let strict = std::env::var("BSPC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    assert!(pass || !strict, "criterion {criterion} failed");
}

/// Runs (or loads) one protocol. Runs are serialized so that cached and
/// fresh runs never race on one directory.
fn cached(command: &str, text: &str) -> (RunConfig, RunManifest, PathBuf) {
    static RUNS: Mutex<()> = Mutex::new(());
    let _g = RUNS.lock().unwrap();
    let cfg = RunConfig::parse::<&str>(text, &[]).unwrap();
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("acceptance-{command}-{}", &cfg.hash()[..16]));
    let manifest = dir.join("manifest.txt");
    let recompute = std::env::var("BSPC_ACCEPTANCE_RECOMPUTE").is_ok_and(|v| v == "1");
    if manifest.exists() && !recompute {
        if let Ok(m) = RunManifest::load(&manifest) {
            if m.config_hash == cfg.hash() {
                return (cfg, m, dir);
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let m = run_command(command, &cfg, &dir).unwrap();
    (cfg, m, dir)
}

fn stationary() -> &'static (RunConfig, RunManifest, PathBuf) {
    static S: OnceLock<(RunConfig, RunManifest, PathBuf)> = OnceLock::new();
    S.get_or_init(|| cached("simulate", STATIONARY))
}

fn mixing() -> &'static (RunConfig, RunManifest, PathBuf) {
    static S: OnceLock<(RunConfig, RunManifest, PathBuf)> = OnceLock::new();
    S.get_or_init(|| cached("mix", MIXING))
}

fn stat(m: &RunManifest, name: &str) -> f64 {
    m.get_stat(name).unwrap_or_else(|| panic!("missing stat {name}")).mean
}

fn sorted_kappas(cfg: &RunConfig) -> Vec<f64> {
    let mut k = cfg.kappas.clone();
    k.sort_by(|a, b| b.partial_cmp(a).unwrap());
    k
}

#[test]
fn criterion_01_toy_spectrum() {
    let start = Instant::now();
    let m = StrainModel::with_defaults(1.0, 1e-8, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut band_ok = true;
    for i in 0..=40 {
        let n = 100.0 * 10f64.powf(i as f64 / 40.0);
        let r = power_spectral_density(&m, n).unwrap() * m.gamma * n / m.chi;
        band_ok &= (TOY_BAND.0..=TOY_BAND.1).contains(&r);
        let h = 2.5e-4 * n;
        let fd = cumulative_mass_between(&m, n - h, n + h).unwrap() / (2.0 * h);
        let g = power_spectral_density(&m, n).unwrap();
        worst = worst.max((fd - g).abs() / g);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = band_ok && worst < TOY_FTC_TOL && secs < TOY_SECONDS;
    verdict(1, "toy spectrum", pass, &format!("plateau in band {band_ok}, FTC rel err {worst:.2e}, {secs:.3} s"));
}

#[test]
fn criterion_02_balance() {
    let (cfg, m, _) = stationary();
    let mut detail = Vec::new();
    let mut pass = true;
    for k in sorted_kappas(cfg) {
        let s = m.get_stat(&format!("{}.balance", kappa_dir(k))).unwrap();
        pass &= (s.mean - 1.0).abs() <= BALANCE_TOL;
        let drift = m.get_flag(&format!("{}.drift", kappa_dir(k))).unwrap_or("?").split(' ').next().unwrap_or("?");
        detail.push(format!("kappa {k:e}: {:.3} +- {:.3} ({drift})", s.mean, s.stderr));
    }
    verdict(2, "L2 balance", pass, &detail.join("; "));
}

#[test]
fn criterion_03_cumulative_law() {
    let (cfg, m, dir) = stationary();
    let k_b = cfg.source.k_b();
    let mut pass = true;
    let mut detail = Vec::new();
    for k in sorted_kappas(cfg) {
        let t = Table::read(&dir.join(kappa_dir(k)).join("spectrum.csv")).unwrap();
        let ns = t.f64s("N").unwrap();
        let cum = t.f64s("cumulative").unwrap();
        let (lo, hi) = (2.0 * k_b, (0.8 / k.sqrt()).floor());
        let (x, y): (Vec<f64>, Vec<f64>) =
            ns.iter().zip(&cum).filter(|(n, _)| **n >= lo && **n <= hi).map(|(n, c)| (n.ln(), *c)).unzip();
        let fit = linear_fit(&x, &y).unwrap();
        // dyadic shells inside the window, informational
        let mut shells = Vec::new();
        let mut n = lo;
        while 2.0 * n <= hi {
            let at = |v: f64| cum[v as usize];
            shells.push(at(2.0 * n) - at(n));
            n *= 2.0;
        }
        let mean = shells.iter().sum::<f64>() / shells.len().max(1) as f64;
        let spread = shells.iter().map(|s| (s / mean - 1.0).abs()).fold(0.0, f64::max);
        pass &= fit.r2 >= CUMULATIVE_R2 && fit.slope > 0.0;
        detail.push(format!(
            "kappa {k:e}: N in [{lo},{hi}] slope {:.2} R2 {:.4}, dyadic spread {:.0}% (limit {:.0}%)",
            fit.slope,
            fit.r2,
            100.0 * spread,
            100.0 * SHELL_SPREAD
        ));
    }
    let kappas = sorted_kappas(cfg);
    let l2: Vec<f64> = kappas.iter().map(|k| stat(m, &format!("{}.l2sq", kappa_dir(*k)))).collect();
    let logs: Vec<f64> = kappas.iter().map(|k| k.ln().abs()).collect();
    let monotone = l2.windows(2).all(|w| w[1] > w[0]);
    let fit = linear_fit(&logs, &l2).unwrap();
    pass &= monotone && fit.slope > 0.0 && fit.r2 >= L2_SWEEP_R2;
    detail.push(format!("L2^2 {:?} vs |log kappa|: monotone {monotone}, slope {:.2}, R2 {:.3}", l2, fit.slope, fit.r2));
    verdict(3, "cumulative spectrum", pass, &detail.join("; "));
}

#[test]
fn criterion_04_flux_budget() {
    let (cfg, m, dir) = stationary();
    let kappas = sorted_kappas(cfg);
    let smallest = *kappas.last().unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for &k in &kappas {
        let t = Table::read(&dir.join(kappa_dir(k)).join("flux.csv")).unwrap();
        let ns = t.f64s("N").unwrap();
        let ratio = t.f64s("budget_ratio").unwrap();
        let flux = t.f64s("flux").unwrap();
        let half_b = t.f64s("half_bN").unwrap();
        for want in FLUX_CUTOFFS {
            let i = ns.iter().position(|n| *n == want).expect("cutoff recorded");
            pass &= (ratio[i] - 1.0).abs() <= BUDGET_TOL;
            let alone = flux[i] / half_b[i];
            if k == smallest {
                pass &= (alone - 1.0).abs() <= FLUX_ALONE_TOL;
            }
            detail.push(format!("kappa {k:e} N {want}: budget {:.3}, flux alone {:.3}", ratio[i], alone));
        }
    }
    let _ = m;
    verdict(4, "flux budget", pass, &detail.join("; "));
}

fn cellular(grid: &Grid, gamma: f64) -> SpectralField {
    // ψ = γ sin x₁ sin x₂, u = (∂₂ψ, −∂₁ψ); strain diag(γ, −γ) at the origin
    let mut tr = Transform::new(grid);
    let len = grid.real_len();
    let (mut u1, mut u2) = (vec![0.0; len], vec![0.0; len]);
    for i in 0..len {
        let x = grid.point(i);
        u1[i] = gamma * x[0].sin() * x[1].cos();
        u2[i] = -gamma * x[0].cos() * x[1].sin();
    }
    tr.forward_field(&[&u1, &u2]).unwrap()
}

#[test]
fn criterion_05_lagrangian_chaos() {
    static L: OnceLock<(RunConfig, RunManifest, PathBuf)> = OnceLock::new();
    let (_, m, _) = L.get_or_init(|| cached("lyapunov", LYAPUNOV));
    let l1 = m.get_stat("lambda1").unwrap();
    let ci: Vec<f64> = m.get_flag("lambda1_ci").unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
    let sum = m.get_stat("sum").unwrap();
    let sum_ci: Vec<f64> = m.get_flag("sum_ci").unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
    let positive = ci[0] > 0.0;
    // zero inside the CI of the sum, or the sum below the resolution of λ₁
    let incompressible = (sum_ci[0] <= 0.0 && 0.0 <= sum_ci[1]) || sum.mean.abs() <= l1.stderr;

    let grid = Grid::new(2, 16).unwrap();
    let gamma = 0.8;
    let u = cellular(&grid, gamma);
    let dt = 0.01;
    let ens = ParticleEnsemble::at(2, vec![[0.0; 3]]);
    let mut tr = LagrangianTracker::new(ens, 0.1, dt, 0.0).unwrap();
    for _ in 0..2000 {
        tr.step(&u, dt);
    }
    let est = estimate_lyapunov(&tr.history, 1).unwrap();
    let strain_err = ((est.lambda[0] - gamma) / gamma).abs().max(((est.lambda[1] + gamma) / gamma).abs());
    let pass = positive && incompressible && strain_err < STRAIN_TOL;
    verdict(
        5,
        "Lagrangian chaos",
        pass,
        &format!(
            "lambda1 {:.4} CI [{:.4}, {:.4}]; sum {:.2e} CI [{:.2e}, {:.2e}]; pure strain rel err {:.2e}",
            l1.mean, ci[0], ci[1], sum.mean, sum_ci[0], sum_ci[1], strain_err
        ),
    );
}

#[test]
fn criterion_06_uniform_mixing() {
    let (_, m, _) = mixing();
    let rate = |k: f64| stat(m, &format!("{}.rate", kappa_dir(k)));
    let control = |k: f64| stat(m, &format!("control.{}.rate", kappa_dir(k)));
    let (a, b) = (rate(1e-3), rate(1e-4));
    let factor = a.max(b) / a.min(b);
    let (ca, cb) = (control(1e-3), control(1e-4));
    let control_ratio = ca / cb;
    let pass = factor.is_finite() && factor <= RATE_FACTOR && (control_ratio / 10.0 - 1.0).abs() <= CONTROL_TOL;
    verdict(
        6,
        "uniform-in-kappa mixing",
        pass,
        &format!(
            "H^-1 rates {a:.4} (1e-3) vs {b:.4} (1e-4), factor {factor:.2}; u=0 rates {ca:.3e} vs {cb:.3e}, ratio {control_ratio:.3}"
        ),
    );
}

#[test]
fn criterion_07_dissipation_time() {
    let (cfg, m, _) = mixing();
    let kappas = sorted_kappas(cfg);
    let x: Vec<f64> = kappas.iter().map(|k| k.ln().abs()).collect();
    let tau: Vec<f64> = kappas.iter().map(|k| stat(m, &format!("{}.tau", kappa_dir(*k)))).collect();
    let fit = linear_fit(&x, &tau);
    let ctau: Vec<f64> = kappas.iter().map(|k| stat(m, &format!("control.{}.tau", kappa_dir(*k))).ln()).collect();
    let logk: Vec<f64> = kappas.iter().map(|k| k.ln()).collect();
    let cfit = linear_fit(&logk, &ctau).unwrap();
    let flow_ok = tau.iter().all(|t| t.is_finite()) && fit.is_some_and(|f| f.slope > 0.0 && f.r2 >= TAU_R2);
    let pass = flow_ok && (cfit.slope + 1.0).abs() <= CONTROL_SLOPE_TOL;
    let (slope, r2) = fit.map(|f| (f.slope, f.r2)).unwrap_or((f64::NAN, f64::NAN));
    verdict(
        7,
        "dissipation timescale",
        pass,
        &format!("tau* {tau:.3?} vs |log kappa|: slope {slope:.3}, R2 {r2:.3}; u=0 log-log slope {:.4}", cfit.slope),
    );
}

fn random_band(grid: &Grid, cut: usize, seed: u64) -> SpectralField {
    let mut s = NoiseStream::new(seed, 91);
    let mut r = vec![0.0; grid.real_len()];
    s.fill_normals(&mut r);
    let mut f = galerkin_projection(&transform_forward(&r, grid).unwrap(), cut);
    f.comp_mut(0)[0] = Complex64::new(0.0, 0.0);
    f
}

fn random_velocity(grid: &Grid, cut: usize, seed: u64) -> SpectralField {
    let comps =
        (0..grid.dim()).map(|j| random_band(grid, cut, seed * 7 + j as u64).into_components().remove(0)).collect();
    project_leray(&SpectralField::from_components(grid, comps).unwrap())
}

/// Largest relative error of the structure-function moment against direct
/// real-space averages over grid-aligned shifts.
fn yaglom_oracle_error() -> f64 {
    let grid = Grid::new(2, 32).unwrap();
    let u = random_velocity(&grid, 5, 21);
    let g = random_band(&grid, 5, 22);
    let kernel = YaglomKernel::new(&u, &g);
    let ur = transform_backward(&u);
    let gr = transform_backward(&g).remove(0);
    let n = grid.n();
    let h = grid.dx();
    let scale = g.norm_l2_squared() * u.norm_l2() / grid.volume().powf(1.5);
    let mut worst: f64 = 0.0;
    for (by, dir) in [([4usize, 0usize], [1.0, 0.0]), ([0, 7], [0.0, 1.0]), ([3, 3], [0.5f64.sqrt(), 0.5f64.sqrt()])] {
        let ell = h * ((by[0] * by[0] + by[1] * by[1]) as f64).sqrt();
        let mut s = 0.0;
        for i in 0..grid.real_len() {
            let (x, y) = (i % n, i / n);
            let j = (x + by[0]) % n + n * ((y + by[1]) % n);
            let dg = gr[j] - gr[i];
            s += dg * dg * ((ur[0][j] - ur[0][i]) * dir[0] + (ur[1][j] - ur[1][i]) * dir[1]);
        }
        let want = s / grid.real_len() as f64;
        let got = kernel.increment_moment(ell, [dir[0], dir[1], 0.0]);
        worst = worst.max((got - want).abs() / scale.max(want.abs()));
    }
    worst
}

#[test]
fn criterion_08_yaglom() {
    let oracle = yaglom_oracle_error();
    let (cfg, _, dir) = stationary();
    let smallest = *sorted_kappas(cfg).last().unwrap();
    let t = Table::read(&dir.join(kappa_dir(smallest)).join("yaglom.csv")).unwrap();
    let ell = t.f64s("ell").unwrap();
    let ratio = t.f64s("ratio").unwrap();
    // longest run of consecutive increments inside the band
    let mut best: f64 = 0.0;
    let mut start = None;
    for i in 0..ell.len() {
        if (YAGLOM_BAND.0..=YAGLOM_BAND.1).contains(&ratio[i]) {
            let s = *start.get_or_insert(i);
            best = best.max((ell[i] / ell[s]).log10());
        } else {
            start = None;
        }
    }
    let plateau = best >= YAGLOM_DECADES;
    let pass = oracle < YAGLOM_ORACLE_TOL;
    verdict(
        8,
        "Yaglom flux",
        pass,
        &format!(
            "oracle rel err {oracle:.2e} (gate); plateau {:.2} decades at kappa {smallest:e} ({}; not gating); ratios {:.2?}",
            best,
            if plateau { "met" } else { "not met" },
            ratio
        ),
    );
}

#[test]
fn criterion_09_besov_growth() {
    let (cfg, m, _) = stationary();
    let b: Vec<f64> = sorted_kappas(cfg).iter().map(|k| stat(m, &format!("{}.besov", kappa_dir(*k)))).collect();
    let pass = b.windows(2).all(|w| w[1] > w[0]);
    verdict(9, "Besov growth", pass, &format!("B^M_2,inf norms {b:.4?} for decreasing kappa"));
}

fn flux_oracle_error() -> f64 {
    let grid = Grid::new(2, 16).unwrap();
    let cut = 2i64;
    let u = random_velocity(&grid, cut as usize, 3);
    let g = random_band(&grid, cut as usize, 4);
    let modes = |f: &SpectralField, c: usize| {
        let mut out = HashMap::new();
        for k1 in -cut..=cut {
            for k2 in -cut..=cut {
                out.insert([k1, k2], f.coeff(c, [k1, k2, 0]));
            }
        }
        out
    };
    let gm = modes(&g, 0);
    let um = [modes(&u, 0), modes(&u, 1)];
    let mut adv: HashMap<[i64; 2], Complex64> = HashMap::new();
    for (p, u0) in &um[0] {
        for (q, gq) in &gm {
            let up = [*u0, um[1][p]];
            let term: Complex64 = (0..2).map(|j| up[j] * Complex64::new(0.0, q[j] as f64) * gq).sum();
            *adv.entry([p[0] + q[0], p[1] + q[1]]).or_default() += term;
        }
    }
    let scale = g.norm_l2_squared() * u.norm_l2();
    let mut worst: f64 = 0.0;
    for n in [1.0, 2.0, 3.5] {
        let want: f64 = adv
            .iter()
            .filter(|(k, _)| ((k[0] * k[0] + k[1] * k[1]) as f64) <= n * n)
            .map(|(k, a)| (g.coeff(0, [k[0], k[1], 0]).conj() * a).re * grid.volume())
            .sum();
        worst = worst.max((spectral_flux(&u, &g, n, Cutoff::Sharp) - want).abs() / scale);
    }
    worst
}

fn round_trip_error() -> f64 {
    let mut worst: f64 = 0.0;
    for (d, n) in [(2, 64), (3, 16)] {
        let grid = Grid::new(d, n).unwrap();
        let mut r = vec![0.0; grid.real_len()];
        NoiseStream::new(5, 5).fill_normals(&mut r);
        let back = transform_backward(&transform_forward(&r, &grid).unwrap()).remove(0);
        let err = r.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err / r.iter().map(|a| a.abs()).fold(0.0, f64::max));
    }
    worst
}

fn replay_identical() -> bool {
    let text = "grid.n = 32\nfluid.dt = 2e-3\nkappa_sweep = 2e-2\nt_burn = 0.5\nt_average = 1\nforcing.amplitude = 3\n";
    let cfg = RunConfig::parse::<&str>(text, &[]).unwrap();
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let (a, b) = (base.join("acceptance-replay-a"), base.join("acceptance-replay-b"));
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
    run_command("simulate", &cfg, &a).unwrap();
    bspc::replay(&a.join("manifest.txt"), &b).unwrap().is_empty()
}

/// Worst `|mean − q²/(2ν|k|²)| / stderr` over the low Stokes modes.
fn stokes_worst_sigma() -> f64 {
    let grid = Grid::new(2, 8).unwrap();
    let nu = 0.5;
    let forcing = ForcingSpec::power_law(&grid, ModeSet::Full, 5.5, 1.0).unwrap();
    let probes: Vec<_> =
        forcing.modes().iter().zip(forcing.q()).filter(|(m, _)| m.norm_k() <= 2.3).map(|(m, q)| (*m, *q)).collect();
    let mut st = FluidStepper::new(
        FluidModel::new(FluidKind::Stokes, nu),
        &grid,
        Some(forcing.clone()),
        0.25,
        NoiseStream::derive(11, purpose::FLUID, 0),
    )
    .unwrap();
    let mut state = FluidState::at_rest(&grid);
    let mut series = vec![Vec::new(); probes.len()];
    for i in 0..40_000 {
        st.step(&mut state).unwrap();
        if i >= 200 {
            for (s, (m, _)) in series.iter_mut().zip(&probes) {
                s.push(m.coefficient(&state.u).powi(2));
            }
        }
    }
    series
        .iter()
        .zip(&probes)
        .map(|(s, (m, q))| {
            let want = q * q / (2.0 * nu * m.norm_k().powi(2));
            let bm = batch_means(s, 40);
            (bm.mean - want).abs() / bm.stderr
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_10_oracles_and_determinism() {
    let flux = flux_oracle_error();
    let yaglom = yaglom_oracle_error();
    let trip = round_trip_error();
    let replay = replay_identical();
    let stokes = stokes_worst_sigma();
    let pass = flux < FLUX_ORACLE_TOL
        && yaglom < YAGLOM_ORACLE_TOL
        && trip < ROUND_TRIP_TOL
        && replay
        && stokes < STOKES_SIGMAS;
    verdict(
        10,
        "oracles and determinism",
        pass,
        &format!(
            "flux oracle {flux:.1e}, Yaglom oracle {yaglom:.1e}, round trip {trip:.1e}, replay identical {replay}, Stokes worst {stokes:.2} sigma"
        ),
    );
}
