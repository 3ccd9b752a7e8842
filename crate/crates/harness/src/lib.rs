//! Configuration, run protocols and outputs for the `bspc` command.

use std::path::PathBuf;

use bspc_core::diagnostics::DiagnosticsError;
use bspc_core::fluid::FluidError;
use bspc_core::lagrangian::LagrangianError;
use bspc_core::scalar::ScalarError;
use bspc_core::spectral::SpectralError;
use bspc_core::toy::ToyError;
use thiserror::Error;

pub mod config;
pub mod lyapunov;
pub mod mixing;
pub mod output;
pub mod stationary;

pub use config::RunConfig;
pub use output::{RunManifest, Stat, Table};

/// Batches used for every batch-means error bar.
pub const BATCHES: usize = 20;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("csv {0}: {1}")]
    Csv(PathBuf, String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("non-finite field at t = {t}")]
    NotFinite { t: f64 },
    #[error("{source}; last good snapshots in {}", snapshot.display())]
    Aborted { source: Box<HarnessError>, snapshot: PathBuf },
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Lagrangian(#[from] LagrangianError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Toy(#[from] ToyError),
}

/// Worker pool sized by `BSPC_THREADS` when set, else by rayon's default.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("BSPC_THREADS").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

/// Runs one of the recorded protocols by command name.
pub fn run_command(command: &str, cfg: &RunConfig, out: &std::path::Path) -> Result<RunManifest, HarnessError> {
    match command {
        "simulate" => stationary::run_stationary(cfg, out),
        "mix" => mixing::run_mixing(cfg, out),
        "lyapunov" => lyapunov::run_lyapunov(cfg, out),
        c => Err(HarnessError::Replay(format!("command '{c}' cannot be replayed"))),
    }
}

/// Reruns the run recorded in `manifest` into `out` and compares every
/// recorded file by SHA-256. Returns the paths that differ.
pub fn replay(manifest: &std::path::Path, out: &std::path::Path) -> Result<Vec<String>, HarnessError> {
    let old = RunManifest::load(manifest)?;
    let cfg = RunConfig::parse::<&str>(&old.config, &[])?;
    if cfg.hash() != old.config_hash {
        return Err(HarnessError::Replay("configuration does not match its recorded hash".into()));
    }
    let new = run_command(&old.command, &cfg, out)?;
    let mut differ = Vec::new();
    for (path, sha, _, _) in &old.files {
        match new.files.iter().find(|f| &f.0 == path) {
            Some(f) if &f.1 == sha => {}
            _ => differ.push(path.clone()),
        }
    }
    Ok(differ)
}
