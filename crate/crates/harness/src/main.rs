use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bspc::config::{schema_text, RunConfig};
use bspc::output::Table;
use bspc::row;
use bspc_core::diagnostics::{
    dyadic_levels, flux_budget, radial_cumulative, yaglom_target, Cutoff, SpectrumSeries, YaglomKernel,
};
use bspc_core::spectral::{load_snapshot, Transform};
use bspc_core::toy::{spectrum_table, StrainModel};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bspc", version, about = "Passive scalar turbulence laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (overrides output_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// extra `key=value` overrides
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SnapshotArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV file to write (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// scalar snapshot
    #[arg(long)]
    scalar: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// stationary run: burn-in, then time-averaged diagnostics per kappa
    Simulate(RunArgs),
    /// source-free mixing ensemble with the u = 0 control
    Mix(RunArgs),
    /// Lagrangian Lyapunov and moment exponents
    Lyapunov(RunArgs),
    /// pure-strain toy spectrum table
    Toy {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-8)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        chi: f64,
        #[arg(long, default_value_t = 2.0)]
        n_min: f64,
        #[arg(long, default_value_t = 1e4)]
        n_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// cumulative spectrum of a scalar snapshot
    Spectrum(SnapshotArgs),
    /// flux budget of a velocity/scalar snapshot pair
    Flux {
        #[command(flatten)]
        snap: SnapshotArgs,
        #[arg(long)]
        velocity: PathBuf,
        #[arg(long)]
        kappa: f64,
    },
    /// structure-function flux of a velocity/scalar snapshot pair
    Yaglom {
        #[command(flatten)]
        snap: SnapshotArgs,
        #[arg(long)]
        velocity: PathBuf,
    },
    /// rerun a manifest and compare every output by SHA-256
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// print the configuration schema
    Schema,
}

fn overrides(seed: Option<u64>, out: Option<&Path>, set: &[String]) -> Result<Vec<(String, String)>> {
    let mut o = Vec::new();
    for s in set {
        let (k, v) = s.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got '{s}'"))?;
        o.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = seed {
        o.push(("rng.seed".into(), seed.to_string()));
    }
    if let Some(out) = out {
        o.push(("output_dir".into(), out.display().to_string()));
    }
    Ok(o)
}

fn config(path: Option<&Path>, o: &[(String, String)]) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p, o)?,
        None => RunConfig::parse("", o)?,
    })
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    let bytes = table.to_bytes();
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn run(args: RunArgs, command: &str) -> Result<()> {
    let o = overrides(args.seed, args.out.as_deref(), &args.set)?;
    let cfg = config(args.config.as_deref(), &o)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let m = bspc::run_command(command, &cfg, &cfg.output_dir)?;
    for (name, s) in &m.stats {
        println!("{name} = {:.6e} +- {:.2e}", s.mean, s.stderr);
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(a) => run(a, "simulate"),
        Command::Mix(a) => run(a, "mix"),
        Command::Lyapunov(a) => run(a, "lyapunov"),
        Command::Toy { gamma, kappa, chi, n_min, n_max, points, out, .. } => {
            if points < 2 || !(n_max > n_min) {
                bail!("need at least two points and n_max > n_min");
            }
            let m = StrainModel::with_defaults(gamma, kappa, chi)?;
            let lo = n_min.max(m.threshold() * (1.0 + 1e-9));
            let ns: Vec<f64> = (0..points).map(|i| lo * (n_max / lo).powf(i as f64 / (points - 1) as f64)).collect();
            let mut t = Table::new(&["n", "Gamma", "cumulative", "reference"]);
            for r in spectrum_table(&m, &ns)? {
                t.push(row![r.n, r.gamma_n, r.cumulative, r.reference]);
            }
            emit(&t, out.as_deref())
        }
        Command::Spectrum(s) => {
            let g = load_snapshot(&s.scalar)?;
            let radial = radial_cumulative(&g);
            let series = SpectrumSeries::from_radial(0.0, &radial, &dyadic_levels(g.grid()));
            let mut t = Table::new(&["t", "N", "cumulative", "shell"]);
            for n in 0..radial.len() {
                let shell = if n == 0 { radial[0] } else { radial[n] - radial[n - 1] };
                t.push(row![series.t, n, radial[n], shell]);
            }
            emit(&t, s.out.as_deref())
        }
        Command::Flux { snap, velocity, kappa } => {
            let cfg = config(snap.config.as_deref(), &overrides(snap.seed, None, &[])?)?;
            let (u, g) = (load_snapshot(&velocity)?, load_snapshot(&snap.scalar)?);
            let mut tr = Transform::new(g.grid());
            let adv = bspc_core::diagnostics::advection(&tr.backward_field(&u), &g, &mut tr);
            let cutoff = if cfg.smooth_cutoff { Cutoff::Smooth } else { Cutoff::Sharp };
            let mut t = Table::new(&["t", "N", "flux", "kappa_gradN", "half_bN"]);
            for &n in &cfg.flux_n {
                let f = flux_budget(&g, &adv, cfg.source.b(), kappa, n, cutoff);
                t.push(row![0.0, n, f.flux, f.kappa_grad, f.half_b]);
            }
            emit(&t, snap.out.as_deref())
        }
        Command::Yaglom { snap, velocity } => {
            let cfg = config(snap.config.as_deref(), &overrides(snap.seed, None, &[])?)?;
            let (u, g) = (load_snapshot(&velocity)?, load_snapshot(&snap.scalar)?);
            let kernel = YaglomKernel::new(&u, &g);
            let target = yaglom_target(g.grid(), cfg.source.chi());
            let mut t = Table::new(&["t", "ell", "flux", "target"]);
            for &ell in &cfg.yaglom_ell {
                t.push(row![0.0, ell, kernel.flux(ell, cfg.yaglom_angles)?, target]);
            }
            emit(&t, snap.out.as_deref())
        }
        Command::Replay { manifest, out } => {
            let differ = bspc::replay(&manifest, &out)?;
            if differ.is_empty() {
                println!("replay identical");
                Ok(())
            } else {
                bail!("replay differs in: {}", differ.join(", "))
            }
        }
        Command::Schema => {
            print!("{}", schema_text());
            Ok(())
        }
    }
}
