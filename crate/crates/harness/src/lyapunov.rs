//! Lagrangian chaos: tracers and tangent maps along a spun-up fluid path.

use std::path::Path;

use bspc_core::fluid::{FluidKind, FluidState, FluidStepper};
use bspc_core::forcing::{purpose, NoiseStream};
use bspc_core::lagrangian::{estimate_lyapunov, estimate_moment_lyapunov, LagrangianTracker, ParticleEnsemble};

use crate::config::RunConfig;
use crate::output::{RunManifest, Stat, Table};
use crate::{row, HarnessError};

pub fn run_lyapunov(cfg: &RunConfig, out: &Path) -> Result<RunManifest, HarnessError> {
    let p = &cfg.particles;
    let mut manifest = RunManifest::new("lyapunov", cfg.hash(), cfg.seed, cfg.canonical());
    manifest.warnings.extend(cfg.warnings.iter().cloned());
    manifest.streams.push(("fluid".into(), format!("{} {} 0", cfg.seed, purpose::FLUID)));
    manifest.streams.push(("particles".into(), format!("{} {} 0", p.seed, purpose::PARTICLES)));
    manifest.streams.push(("bootstrap".into(), format!("{} {} 0", p.seed, purpose::BOOTSTRAP)));
    let grid = &cfg.grid;
    let mut fluid = FluidStepper::new(
        cfg.model.clone(),
        grid,
        Some(cfg.forcing.clone()),
        cfg.dt,
        NoiseStream::derive(cfg.seed, purpose::FLUID, 0),
    )?;
    let mut fstate = FluidState::at_rest(grid);
    if matches!(cfg.model.kind, FluidKind::OuTower(_)) {
        fstate.z = fluid.initial_tower();
    }
    let spinup = cfg.steps_for(cfg.lyap_t_spinup);
    for _ in 0..spinup {
        fluid.step(&mut fstate)?;
    }
    let ens = ParticleEnsemble::uniform(grid.dim(), p.count, &mut NoiseStream::derive(p.seed, purpose::PARTICLES, 0));
    let mut tracker = LagrangianTracker::new(ens, p.t_qr, cfg.dt, p.mode_tol)?.with_interpolation(p.interpolation);

    let d = grid.dim();
    let mut header = vec!["t".to_string()];
    for i in 1..=d {
        header.extend([format!("lambda{i}"), format!("lambda{i}_lo"), format!("lambda{i}_hi")]);
    }
    header.extend(["sum", "sum_lo", "sum_hi", "particles"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };

    let steps = cfg.steps_for(cfg.lyap_t_run);
    let mut checkpoints = tracker.history.times.len();
    let mut last = None;
    for _ in 0..steps {
        tracker.step(&fstate.u, cfg.dt);
        fluid.step(&mut fstate)?;
        if tracker.history.times.len() > checkpoints {
            checkpoints = tracker.history.times.len();
            // estimates only once the horizon spans ten renormalizations
            if let Ok(est) = estimate_lyapunov(&tracker.history, p.seed) {
                let mut r = row![est.t];
                for i in 0..d {
                    r.extend(row![est.lambda[i], est.ci[i].0, est.ci[i].1]);
                }
                r.extend(row![est.sum, est.sum_ci.0, est.sum_ci.1, est.particles]);
                table.push(r);
                last = Some(est);
            }
        }
    }
    let est = match last {
        Some(e) => e,
        None => estimate_lyapunov(&tracker.history, p.seed)?,
    };
    let counter = spinup + steps;
    let t1 = est.t;
    for i in 0..d {
        // the CI is reported as its half-width in the stderr slot
        let half = 0.5 * (est.ci[i].1 - est.ci[i].0);
        manifest.stat(
            format!("lambda{}", i + 1),
            Stat { mean: est.lambda[i], stderr: half, t0: 0.0, t1, samples: est.particles },
        );
        manifest.flag(format!("lambda{}_ci", i + 1), format!("{:?} {:?}", est.ci[i].0, est.ci[i].1));
    }
    manifest.stat(
        "sum",
        Stat { mean: est.sum, stderr: 0.5 * (est.sum_ci.1 - est.sum_ci.0), t0: 0.0, t1, samples: est.particles },
    );
    manifest.flag("sum_ci", format!("{:?} {:?}", est.sum_ci.0, est.sum_ci.1));
    manifest.write_table(out, "lyapunov.csv", &table, counter)?;

    let (moments, warnings) = estimate_moment_lyapunov(&tracker.history, &p.moments)?;
    manifest.warnings.extend(warnings);
    let mut mt = Table::new(&["p", "Lambda", "Lambda_over_p", "r2", "t0", "t1"]);
    for m in &moments {
        let per = if m.p > 0.0 { m.lambda / m.p } else { f64::NAN };
        mt.push(row![m.p, m.lambda, per, m.r2, m.window.0, m.window.1]);
    }
    manifest.write_table(out, "moments.csv", &mt, counter)?;
    manifest.save(out)?;
    Ok(manifest)
}
