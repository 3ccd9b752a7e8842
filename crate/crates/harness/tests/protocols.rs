use std::path::PathBuf;

use bspc::config::RunConfig;
use bspc::mixing::{fit_decay_rate, run_mixing};
use bspc::output::Table;
use bspc::stationary::run_stationary;
use bspc::HarnessError;
use bspc_core::scalar::NormSample;
use proptest::prelude::*;

fn scratch(name: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("protocols-{name}"));
    let _ = std::fs::remove_dir_all(&p);
    p
}

const SMALL: &str = "grid.n = 32
fluid.dt = 2e-3
kappa_sweep = 2e-2,1e-2
forcing.amplitude = 3
t_burn = 0.2
t_average = 0.4
diag.flux_N = 4,8
diag.yaglom_ell = 0.3
ensemble_size = 2
mix.t_spinup = 0.1
mix.t_mix = 0.4
";

fn small(extra: &[(&str, &str)]) -> RunConfig {
    let o: Vec<(&str, String)> = extra.iter().map(|(k, v)| (*k, v.to_string())).collect();
    RunConfig::parse(SMALL, &o).unwrap()
}

fn samples(rate: f64, h0: f64, dt: f64, count: usize) -> Vec<NormSample> {
    (0..count)
        .map(|i| {
            let t = i as f64 * dt;
            NormSample { t, l2: 1.0, h1: 1.0, hm1: h0 * (-rate * t).exp(), grad2: 1.0, mean: 0.0 }
        })
        .collect()
}

#[test]
fn decay_fit_recovers_exponential() {
    let f = fit_decay_rate(&samples(0.7, 2.0, 0.1, 400), 1e-6, 0.3);
    assert!((f.rate - 0.7).abs() < 1e-10);
    assert!(f.r2 > 1.0 - 1e-12);
    // window honours the relative bounds
    assert!((-0.7 * f.t0).exp() <= 0.3 + 1e-12 && (-0.7 * f.t1).exp() >= 1e-6);
    assert!(fit_decay_rate(&samples(0.7, 2.0, 0.1, 3), 1e-6, 0.3).rate.is_nan());
}

#[test]
fn stationary_is_deterministic_and_complete() {
    let cfg = small(&[]);
    let a = run_stationary(&cfg, &scratch("det-a")).unwrap();
    let b = run_stationary(&cfg, &scratch("det-b")).unwrap();
    assert_eq!(a.files, b.files);
    for name in ["kappa_2e-2.balance", "kappa_1e-2.flux_8", "kappa_1e-2.budget_4", "kappa_1e-2.besov"] {
        assert!(a.get_stat(name).is_some(), "{name}");
    }
    assert_eq!(a.get_stat("kappa_1e-2.balance").unwrap().samples, 8);
    // every file row count and counter is recorded
    let total = cfg.steps_for(cfg.t_burn) + cfg.steps_for(cfg.t_average);
    assert!(a.files.iter().all(|f| f.3 == total));
    let other = run_stationary(&small(&[("rng.seed", "2")]), &scratch("det-c")).unwrap();
    assert_ne!(a.files, other.files);
}

#[test]
fn one_fluid_path_drives_every_kappa() {
    // a single diffusivity reproduces its member of the sweep exactly
    let both = run_stationary(&small(&[]), &scratch("crn-both")).unwrap();
    let dir = scratch("crn-one");
    let one = run_stationary(&small(&[("kappa_sweep", "1e-2")]), &dir).unwrap();
    let find = |m: &bspc::RunManifest, p: &str| m.files.iter().find(|f| f.0 == p).unwrap().1.clone();
    assert_eq!(find(&both, "kappa_1e-2/timeseries.csv"), find(&one, "kappa_1e-2/timeseries.csv"));
    let t = Table::read(&dir.join("kappa_1e-2/timeseries.csv")).unwrap();
    assert_eq!(t.header, ["step", "t", "L2", "H1", "Hm1", "mean", "balance", "averaging"]);
}

#[test]
fn cfl_violation_surfaces() {
    let err = run_stationary(&small(&[("fluid.dt", "0.2"), ("forcing.amplitude", "50")]), &scratch("cfl")).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("CFL"), "{text}");
    assert!(matches!(err, HarnessError::Fluid(_) | HarnessError::Scalar(_) | HarnessError::Aborted { .. }));
}

#[test]
fn control_decays_at_the_heat_rate() {
    let dir = scratch("control");
    let m = run_mixing(&small(&[("kappa_sweep", "1e-2,1e-3"), ("scalar.allow_underresolved", "true")]), &dir).unwrap();
    for k in [1e-2f64, 1e-3] {
        let kd = bspc::output::kappa_dir(k);
        let rate = m.get_stat(&format!("control.{kd}.rate")).unwrap().mean;
        let tau = m.get_stat(&format!("control.{kd}.tau")).unwrap().mean;
        assert!((rate / k - 1.0).abs() < 1e-9, "{rate}");
        // single mode at |k| = 1: the L² norm halves at ln 2 / κ (linear interpolation between samples)
        assert!((tau * k / std::f64::consts::LN_2 - 1.0).abs() < 2e-3, "{tau}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decay_fit_is_scale_invariant(rate in 0.05f64..3.0, h0 in 1e-3f64..1e3, c in 1e-3f64..1e3) {
        let a = fit_decay_rate(&samples(rate, h0, 0.05, 600), 1e-4, 0.3);
        let b = fit_decay_rate(&samples(rate, c * h0, 0.05, 600), 1e-4, 0.3);
        prop_assert!((a.rate - b.rate).abs() < 1e-9 * rate);
        prop_assert_eq!(a.points, b.points);
    }
}
