//! White-in-time velocity forcing, the rank-one scalar source, and exact
//! Ornstein–Uhlenbeck updates for coloured-in-time forcing.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::spectral::{BasisMode, Complex64, Grid, SpectralError, SpectralField};

#[derive(Debug, Error)]
pub enum ForcingError {
    #[error("forcing has no active modes")]
    NoModes,
    #[error("decay exponent {alpha} must exceed {bound} for full-spectrum forcing in d = {dim}")]
    Alpha { alpha: f64, bound: f64, dim: usize },
    #[error("amplitude must be positive, got {0}")]
    Amplitude(f64),
    #[error("time step must be positive, got {0}")]
    Step(f64),
    #[error("source field must be a nonzero, mean-zero scalar supported in |k| <= {k_b}")]
    Source { k_b: f64 },
    #[error("OU drift matrix must have a strictly positive real spectrum; found eigenvalue {re} + {im}i")]
    Spectrum { re: f64, im: f64 },
    #[error("OU matrices have incompatible shapes: A is {a}x{a}, Gamma has {g} rows")]
    Shape { a: usize, g: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Counter-addressed source of standard normals.
///
/// Draw number `c` of stream `(seed, stream_id)` is a pure function of those
/// three values, so restarts and parallel members never share state.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

/// Stream purposes, packed into the high bits of the stream id.
pub mod purpose {
    pub const FLUID: u64 = 1;
    pub const SOURCE: u64 = 2;
    pub const OU: u64 = 3;
    pub const PARTICLES: u64 = 4;
    pub const INITIAL: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        NoiseStream { seed, stream_id, counter: 0, rng }
    }

    /// Stream for a given purpose and ensemble member.
    pub fn derive(seed: u64, purpose: u64, member: u64) -> Self {
        Self::new(seed, (purpose << 40) | member)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn set_counter(&mut self, counter: u64) {
        self.counter = counter;
    }

    pub fn normal(&mut self) -> f64 {
        let mut z = [0.0];
        self.fill_normals(&mut z);
        z[0]
    }

    /// Fills `out` with draws `counter, counter+1, …` and advances the counter.
    ///
    /// Draws `2p` and `2p+1` are the cosine and sine branches of one
    /// Box–Muller pair built from the two `u64` words at block position `p`.
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        let mut c = self.counter;
        let end = c + out.len() as u64;
        self.rng.set_word_pos(4 * (c / 2) as u128);
        let mut i = 0;
        while c < end {
            let u1 = unit_open(self.rng.next_u64());
            let u2 = unit_open(self.rng.next_u64());
            let r = (-2.0 * u1.ln()).sqrt();
            let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
            if c.is_multiple_of(2) {
                out[i] = r * cos;
                i += 1;
                c += 1;
                if c < end {
                    out[i] = r * sin;
                    i += 1;
                    c += 1;
                }
            } else {
                out[i] = r * sin;
                i += 1;
                c += 1;
            }
        }
        self.counter = end;
    }

    /// Uniform on `(0, 1]`; each value uses one full draw slot pair position.
    pub fn fill_uniform(&mut self, out: &mut [f64]) {
        for u in out.iter_mut() {
            self.rng.set_word_pos(4 * (self.counter / 2) as u128 + 2 * (self.counter % 2) as u128);
            *u = unit_open(self.rng.next_u64());
            self.counter += 1;
        }
    }
}

fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Which basis modes carry noise.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeSet {
    /// every mode retained by the 2/3 rule
    Full,
    /// `|m|_∞ ≤ N`
    Cube(usize),
    Explicit(Vec<BasisMode>),
}

/// Precomputed write of one basis mode into the half-spectrum arrays.
#[derive(Clone, Debug)]
struct ModeSlot {
    s: usize,
    partner: Option<usize>,
    v: [Complex64; 3],
}

/// The noise law `QẆ = Σ q_m e_m Ẇ^m` on a fixed grid.
#[derive(Clone, Debug)]
pub struct ForcingSpec {
    grid: Grid,
    modes: Vec<BasisMode>,
    q: Vec<f64>,
    alpha: f64,
    amplitude: f64,
    slots: Vec<ModeSlot>,
}

/// All basis modes with `0 < |k|_∞ ≤ kmax`, sorted.
pub fn modes_in_cube(dim: usize, kmax: usize) -> Vec<BasisMode> {
    let r = kmax as i64;
    let mut out = Vec::new();
    let r3 = if dim == 3 { r } else { 0 };
    for k3 in -r3..=r3 {
        for k2 in -r..=r {
            for k1 in -r..=r {
                if (k1, k2, k3) == (0, 0, 0) {
                    continue;
                }
                for pol in 0..dim - 1 {
                    out.push(BasisMode::new([k1, k2, k3], pol));
                }
            }
        }
    }
    out
}

impl ForcingSpec {
    /// `q_m = amplitude · |k|^{−α}` over the chosen mode set.
    pub fn power_law(grid: &Grid, set: ModeSet, alpha: f64, amplitude: f64) -> Result<Self, ForcingError> {
        if !(amplitude > 0.0) {
            return Err(ForcingError::Amplitude(amplitude));
        }
        let dim = grid.dim();
        let modes = match set {
            ModeSet::Full => {
                let bound = 2.5 * dim as f64;
                if !(alpha > bound) {
                    return Err(ForcingError::Alpha { alpha, bound, dim });
                }
                modes_in_cube(dim, grid.k_max_dealiased())
            }
            ModeSet::Cube(n) => modes_in_cube(dim, n.min(grid.k_max_dealiased())),
            ModeSet::Explicit(list) => list,
        };
        let q = modes.iter().map(|m| amplitude * m.norm_k().powf(-alpha)).collect();
        Self::from_coefficients(grid, modes, q, alpha, amplitude)
    }

    pub fn from_coefficients(
        grid: &Grid,
        modes: Vec<BasisMode>,
        q: Vec<f64>,
        alpha: f64,
        amplitude: f64,
    ) -> Result<Self, ForcingError> {
        if modes.is_empty() {
            return Err(ForcingError::NoModes);
        }
        let mut slots = Vec::with_capacity(modes.len());
        for m in &modes {
            m.validate(grid.dim())?;
            let (s, conj) = grid.index_of(m.k).ok_or(SpectralError::OffGrid(m.k))?;
            let mut v = m.fourier(grid.dim());
            if conj {
                v = v.map(|c| c.conj());
            }
            let partner = if m.k[0] == 0 { grid.index_of([-m.k[0], -m.k[1], -m.k[2]]).map(|(t, _)| t) } else { None };
            slots.push(ModeSlot { s, partner, v });
        }
        Ok(ForcingSpec { grid: grid.clone(), modes, q, alpha, amplitude, slots })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn modes(&self) -> &[BasisMode] {
        &self.modes
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `Σ_m q_m²` over the retained modes.
    pub fn sum_q2(&self) -> f64 {
        self.q.iter().map(|q| q * q).sum()
    }

    /// `sup_m |k| q_m`.
    pub fn sup_k_q(&self) -> f64 {
        self.modes.iter().zip(&self.q).map(|(m, q)| m.norm_k() * q).fold(0.0, f64::max)
    }

    pub fn sup_q(&self) -> f64 {
        self.q.iter().cloned().fold(0.0, f64::max)
    }

    /// `field += Σ_m amp_m e_m`, with one amplitude per active mode.
    pub fn add_modes(&self, field: &mut SpectralField, amps: &[f64]) {
        let dim = self.grid.dim();
        for (slot, &a) in self.slots.iter().zip(amps) {
            for j in 0..dim {
                let v = slot.v[j] * a;
                field.comp_mut(j)[slot.s] += v;
                if let Some(t) = slot.partner {
                    field.comp_mut(j)[t] += v.conj();
                }
            }
        }
    }

    /// `Σ_m q_m e_m ξ_m √dt`.
    pub fn sample_velocity_increment(&self, dt: f64, stream: &mut NoiseStream) -> Result<SpectralField, ForcingError> {
        if !(dt > 0.0) {
            return Err(ForcingError::Step(dt));
        }
        let mut xi = vec![0.0; self.modes.len()];
        stream.fill_normals(&mut xi);
        let sq = dt.sqrt();
        for (x, q) in xi.iter_mut().zip(&self.q) {
            *x *= q * sq;
        }
        let mut out = SpectralField::vector(&self.grid);
        self.add_modes(&mut out, &xi);
        Ok(out)
    }
}

/// The source `b` driven by one Brownian motion `β`.
#[derive(Clone, Debug)]
pub struct ScalarSourceSpec {
    b: SpectralField,
    chi: f64,
    k_b: f64,
}

impl ScalarSourceSpec {
    pub fn new(b: SpectralField, k_b: f64) -> Result<Self, ForcingError> {
        let g = b.grid().clone();
        let err = ForcingError::Source { k_b };
        if b.n_components() != 1 || b.comp(0)[0].norm() > 1e-14 {
            return Err(err);
        }
        for (s, v) in b.comp(0).iter().enumerate() {
            if v.norm() > 0.0 && g.k_squared(s) > k_b * k_b + 1e-9 {
                return Err(err);
            }
        }
        let chi = b.norm_l2_squared();
        if !(chi > 0.0) {
            return Err(err);
        }
        Ok(ScalarSourceSpec { b, chi, k_b })
    }

    /// `b = a·(cos x₁ + sin x₂)` in 2D and `a·(cos x₁ + sin x₂ + cos x₃)` in 3D.
    pub fn preset(grid: &Grid, amplitude: f64) -> Result<Self, ForcingError> {
        let mut b = SpectralField::scalar(grid);
        let half = 0.5 * amplitude;
        b.add_mode(0, [1, 0, 0], Complex64::new(half, 0.0))?;
        b.add_mode(0, [0, 1, 0], Complex64::new(0.0, -half))?;
        if grid.dim() == 3 {
            b.add_mode(0, [0, 0, 1], Complex64::new(half, 0.0))?;
        }
        Self::new(b, 2.0)
    }

    pub fn b(&self) -> &SpectralField {
        &self.b
    }

    /// `χ = ‖b‖²_{L²}`.
    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn k_b(&self) -> f64 {
        self.k_b
    }

    /// One increment `Δβ = ξ√dt`.
    pub fn sample_beta_increment(&self, dt: f64, stream: &mut NoiseStream) -> f64 {
        stream.normal() * dt.sqrt()
    }

    /// `b · ξ√dt` as a field.
    pub fn sample_scalar_increment(&self, dt: f64, stream: &mut NoiseStream) -> SpectralField {
        self.b.scaled(self.sample_beta_increment(dt, stream))
    }
}

/// Exact one-step transition of `dZ = −A Z dt + Γ dW`:
/// `Z' = Φ Z + L ξ` with `Φ = e^{−A dt}` and `L Lᵀ` the exact step covariance.
#[derive(Clone, Debug)]
pub struct OuStep {
    phi: DMatrix<f64>,
    chol: DMatrix<f64>,
}

fn check_spectrum(a: &DMatrix<f64>) -> Result<(), ForcingError> {
    for ev in a.complex_eigenvalues().iter() {
        let scale = 1.0f64.max(ev.norm());
        if ev.re <= 0.0 || ev.im.abs() > 1e-8 * scale {
            return Err(ForcingError::Spectrum { re: ev.re, im: ev.im });
        }
    }
    Ok(())
}

impl OuStep {
    pub fn new(a: &DMatrix<f64>, gamma: &DMatrix<f64>, dt: f64) -> Result<Self, ForcingError> {
        let d = a.nrows();
        if a.ncols() != d || gamma.nrows() != d {
            return Err(ForcingError::Shape { a: d, g: gamma.nrows() });
        }
        if !(dt > 0.0) {
            return Err(ForcingError::Step(dt));
        }
        check_spectrum(a)?;
        // Van Loan: exp([[A, ΓΓᵀ], [0, −Aᵀ]] dt)
        let mut c = DMatrix::zeros(2 * d, 2 * d);
        c.view_mut((0, 0), (d, d)).copy_from(&(a * dt));
        c.view_mut((0, d), (d, d)).copy_from(&(gamma * gamma.transpose() * dt));
        c.view_mut((d, d), (d, d)).copy_from(&(-a.transpose() * dt));
        let m = c.exp();
        let phi = m.view((d, d), (d, d)).transpose();
        let cov = &phi * m.view((0, d), (d, d));
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = cov.symmetric_eigen();
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let chol = &eig.eigenvectors * DMatrix::from_diagonal(&root);
        Ok(OuStep { phi, chol })
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Exact covariance of one step started from zero.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// Advances `z` using the normals in `xi` (length `dim`).
    pub fn apply(&self, z: &mut [f64], xi: &[f64]) {
        let zv = DVector::from_column_slice(z);
        let next = &self.phi * zv + &self.chol * DVector::from_column_slice(xi);
        z.copy_from_slice(next.as_slice());
    }

    pub fn step(&self, z: &mut [f64], stream: &mut NoiseStream) {
        let mut xi = vec![0.0; self.dim()];
        stream.fill_normals(&mut xi);
        self.apply(z, &xi);
    }
}

/// One exact OU step of `Z` (pure given the stream).
pub fn step_ou_tower(
    z: &[f64],
    a: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    dt: f64,
    stream: &mut NoiseStream,
) -> Result<Vec<f64>, ForcingError> {
    let step = OuStep::new(a, gamma, dt)?;
    let mut out = z.to_vec();
    step.step(&mut out, stream);
    Ok(out)
}

/// Drift matrix of the chain `Ż_ℓ = −Z_ℓ + Z_{ℓ+1}`, `Ż_top = −Z_top + Ẇ`.
pub fn chain_matrix(levels: usize) -> DMatrix<f64> {
    let mut a = DMatrix::identity(levels, levels);
    for l in 0..levels.saturating_sub(1) {
        a[(l, l + 1)] = -1.0;
    }
    a
}
