//! Periodic grids, half-spectrum fields, FFTs and the spectral operators built on them.
//!
//! Fourier convention: `ĝ(k) = n^{-d} Σ_x g(x) e^{-ik·x}`, so that
//! `g(x) = Σ_k ĝ(k) e^{ik·x}` and `‖g‖²_{L²} = (2π)^d Σ_k |ĝ(k)|²`.

mod basis;
mod field;
mod grid;
mod ops;
mod snapshot;
mod transform;

pub use basis::{basis_mode, c_d, gamma, is_positive, BasisMode};
pub use field::{Rank, SpectralField};
pub use grid::Grid;
pub use ops::{
    curl2d, dealias, dealias_in_place, derivative, divergence, galerkin_projection, gradient, project_leray,
    project_leray_in_place, psi, sharp_projection, smooth_projection, sobolev_norm, translate, zeta, Band, SmoothKind,
};
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot, SNAPSHOT_VERSION};
pub use transform::{transform_backward, transform_forward, Transform};

pub use rustfft::num_complex::Complex64;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("points per axis must be a power of two and at least 8, got {0}")]
    Resolution(usize),
    #[error("expected {expected} samples, got {got}")]
    Length { expected: usize, got: usize },
    #[error("grids differ: {0:?} vs {1:?}")]
    GridMismatch(Grid, Grid),
    #[error("expected a {expected:?} field, got {got:?}")]
    RankMismatch { expected: Rank, got: Rank },
    #[error("basis mode needs a nonzero wavevector")]
    ZeroWavevector,
    #[error("polarization {i} out of range for dimension {dim}")]
    Polarization { i: usize, dim: usize },
    #[error("wavevector {0:?} is not representable on this grid")]
    OffGrid([i64; 3]),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("snapshot version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
