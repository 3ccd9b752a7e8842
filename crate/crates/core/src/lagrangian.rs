//! Tracer trajectories and tangent maps for Lyapunov exponent estimation.

use thiserror::Error;

use crate::forcing::NoiseStream;
use crate::spectral::{derivative, Complex64, Grid, SpectralField, Transform};
use crate::stats::{bootstrap_median_ci, linear_fit, median, NeumaierSum};

#[derive(Debug, Error)]
pub enum LagrangianError {
    #[error(
        "horizon {t:.3} is shorter than 10 renormalization intervals ({min:.3}); run longer or lower particles.t_qr"
    )]
    ShortHorizon { t: f64, min: f64 },
    #[error("moment exponents need finite log-stretch data at two or more distinct times")]
    Degenerate,
    #[error("p = {0} is outside (0, 1]")]
    MomentOrder(f64),
    #[error("renormalization interval must be a positive multiple of the time step")]
    Cadence,
}

type Mat = [[f64; 3]; 3];

const IDENTITY: Mat = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Tracers with their tangent matrices and accumulated QR log-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub positions: Vec<[f64; 3]>,
    /// row-major `d×d` tangent matrices (unused entries stay zero)
    pub tangents: Vec<Mat>,
    pub log_sums: Vec<[NeumaierSum; 3]>,
    pub t: f64,
}

impl ParticleEnsemble {
    pub fn at(dim: usize, positions: Vec<[f64; 3]>) -> Self {
        let mut id = IDENTITY;
        if dim == 2 {
            id[2][2] = 0.0;
        }
        let p = positions.len();
        ParticleEnsemble {
            dim,
            positions,
            tangents: vec![id; p],
            log_sums: vec![[NeumaierSum::default(); 3]; p],
            t: 0.0,
        }
    }

    /// `count` particles placed uniformly at random on the torus.
    pub fn uniform(dim: usize, count: usize, stream: &mut NoiseStream) -> Self {
        let mut u = vec![0.0; count * dim];
        stream.fill_uniform(&mut u);
        let positions = (0..count)
            .map(|i| {
                let mut x = [0.0; 3];
                for j in 0..dim {
                    x[j] = std::f64::consts::TAU * u[i * dim + j];
                }
                x
            })
            .collect();
        Self::at(dim, positions)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Accumulated `log R_ii` for particle `p`, including the current tangent.
    pub fn log_stretch(&self, p: usize) -> [f64; 3] {
        let (_, r) = qr(&self.tangents[p], self.dim);
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            out[i] = self.log_sums[p][i].value() + r[i][i].ln();
        }
        out
    }

    pub fn determinant(&self, p: usize) -> f64 {
        let m = &self.tangents[p];
        if self.dim == 2 {
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        } else {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }

    /// Replaces every tangent by its `Q` factor and banks `log R_ii`.
    pub fn renormalize(&mut self) {
        for p in 0..self.len() {
            let (q, r) = qr(&self.tangents[p], self.dim);
            for i in 0..self.dim {
                self.log_sums[p][i].add(r[i][i].ln());
            }
            self.tangents[p] = q;
        }
    }
}

/// Modified Gram–Schmidt on columns; `R` has a positive diagonal.
fn qr(m: &Mat, dim: usize) -> (Mat, Mat) {
    let mut q = [[0.0; 3]; 3];
    let mut r = [[0.0; 3]; 3];
    let mut cols = [[0.0; 3]; 3];
    for j in 0..dim {
        for i in 0..dim {
            cols[j][i] = m[i][j];
        }
    }
    for j in 0..dim {
        let mut v = cols[j];
        for k in 0..j {
            let qk = [q[0][k], q[1][k], q[2][k]];
            let dot: f64 = (0..dim).map(|i| qk[i] * v[i]).sum();
            r[k][j] = dot;
            for i in 0..dim {
                v[i] -= dot * qk[i];
            }
        }
        let norm = (0..dim).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        r[j][j] = norm;
        for i in 0..dim {
            q[i][j] = v[i] / norm;
        }
    }
    (q, r)
}

#[derive(Clone, Debug)]
struct Term {
    k: [i32; 3],
    /// `w·û_j(k)`, with `w` the half-spectrum multiplicity
    c: [Complex64; 3],
}

/// Pointwise velocity and velocity gradient by direct trigonometric
/// summation over the modes whose amplitude exceeds `tol · max|û|`.
#[derive(Clone, Debug)]
pub struct VelocityEvaluator {
    dim: usize,
    kmax: usize,
    terms: Vec<Term>,
}

impl VelocityEvaluator {
    pub fn new(u: &SpectralField, tol: f64) -> Self {
        let g = u.grid();
        let dim = g.dim();
        let amp = |s: usize| -> f64 { (0..dim).map(|j| u.comp(j)[s].norm_sqr()).sum::<f64>().sqrt() };
        let top = (0..g.spectral_len()).map(amp).fold(0.0, f64::max);
        let mut terms = Vec::new();
        let mut kmax = 0;
        for s in 0..g.spectral_len() {
            let a = amp(s);
            if a == 0.0 || a <= tol * top {
                continue;
            }
            let k = g.wave(s);
            let w = g.weight(s);
            let mut c = [Complex64::new(0.0, 0.0); 3];
            for j in 0..dim {
                c[j] = u.comp(j)[s] * w;
            }
            kmax = kmax.max(k.iter().map(|v| v.unsigned_abs() as usize).max().unwrap());
            terms.push(Term { k, c });
        }
        VelocityEvaluator { dim, kmax, terms }
    }

    pub fn active_modes(&self) -> usize {
        self.terms.len()
    }
}

/// Velocity and velocity gradient at an arbitrary point of the torus.
pub trait PointVelocity {
    /// `(u(x), ∇u(x))` with `grad[j][l] = ∂_l u_j`.
    fn eval(&self, x: &[f64; 3]) -> ([f64; 3], Mat);
}

impl PointVelocity for VelocityEvaluator {
    fn eval(&self, x: &[f64; 3]) -> ([f64; 3], Mat) {
        let kmax = self.kmax as i32;
        let span = 2 * self.kmax + 1;
        let mut tables = vec![Complex64::new(0.0, 0.0); 3 * span];
        for j in 0..self.dim {
            for m in -kmax..=kmax {
                tables[j * span + (m + kmax) as usize] = Complex64::from_polar(1.0, m as f64 * x[j]);
            }
        }
        let mut u = [0.0; 3];
        let mut grad = [[0.0; 3]; 3];
        let d = self.dim;
        for t in &self.terms {
            let mut phase = tables[(t.k[0] + kmax) as usize] * tables[span + (t.k[1] + kmax) as usize];
            if d == 3 {
                phase *= tables[2 * span + (t.k[2] + kmax) as usize];
            }
            for j in 0..d {
                let c = t.c[j] * phase;
                u[j] += c.re;
                for l in 0..d {
                    grad[j][l] -= t.k[l] as f64 * c.im;
                }
            }
        }
        (u, grad)
    }
}

/// Multilinear interpolation of grid samples of `u` and `∇u`.
///
/// Much cheaper than exact summation for large ensembles, but only second
/// order in the grid spacing, and the interpolated gradient is not exactly
/// trace-free, so tangent determinants drift faster.
#[derive(Clone, Debug)]
pub struct BilinearEvaluator {
    grid: Grid,
    u: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
}

impl BilinearEvaluator {
    pub fn new(u: &SpectralField) -> Self {
        let grid = u.grid().clone();
        let d = grid.dim();
        let mut tr = Transform::new(&grid);
        let ur = tr.backward_field(u);
        let mut grad = Vec::with_capacity(d * d);
        for j in 0..d {
            let uj = SpectralField::from_components(&grid, vec![u.comp(j).to_vec()]).expect("same grid");
            for l in 0..d {
                let mut order = [0u32; 3];
                order[l] = 1;
                grad.push(tr.backward_field(&derivative(&uj, &order[..d])).remove(0));
            }
        }
        BilinearEvaluator { grid, u: ur, grad }
    }
}

impl PointVelocity for BilinearEvaluator {
    fn eval(&self, x: &[f64; 3]) -> ([f64; 3], Mat) {
        let n = self.grid.n();
        let d = self.grid.dim();
        let h = self.grid.dx();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for j in 0..d {
            let s = x[j].rem_euclid(std::f64::consts::TAU) / h;
            let f = s.floor();
            base[j] = (f as usize) % n;
            frac[j] = s - f;
        }
        let corners = 1usize << d;
        let mut weights = [(0usize, 0.0f64); 8];
        for (c, slot) in weights.iter_mut().enumerate().take(corners) {
            let mut idx = 0;
            let mut stride = 1;
            let mut w = 1.0;
            for j in 0..d {
                let bit = (c >> j) & 1;
                idx += ((base[j] + bit) % n) * stride;
                stride *= n;
                w *= if bit == 1 { frac[j] } else { 1.0 - frac[j] };
            }
            *slot = (idx, w);
        }
        let interp = |f: &[f64]| weights[..corners].iter().map(|&(i, w)| w * f[i]).sum::<f64>();
        let mut u = [0.0; 3];
        let mut grad = [[0.0; 3]; 3];
        for j in 0..d {
            u[j] = interp(&self.u[j]);
            for l in 0..d {
                grad[j][l] = interp(&self.grad[j * d + l]);
            }
        }
        (u, grad)
    }
}

/// How the tracker samples the velocity at particle positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// exact trigonometric summation
    #[default]
    Exact,
    /// multilinear interpolation of grid values
    Bilinear,
}

fn matmul(a: &Mat, b: &Mat, d: usize) -> Mat {
    let mut c = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            c[i][j] = (0..d).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// One RK4 step of positions and tangents with the velocity frozen over the step.
pub fn advect<E: PointVelocity + ?Sized>(ens: &mut ParticleEnsemble, eval: &E, dt: f64) {
    let d = ens.dim;
    let tau = std::f64::consts::TAU;
    for p in 0..ens.len() {
        let x0 = ens.positions[p];
        let m0 = ens.tangents[p];
        let mut xs = x0;
        let mut ms = m0;
        let mut dx = [0.0; 3];
        let mut dm = [[0.0; 3]; 3];
        let weights = [1.0, 2.0, 2.0, 1.0];
        let offsets = [0.5, 0.5, 1.0];
        for stage in 0..4 {
            let (v, grad) = eval.eval(&xs);
            let km = matmul(&grad, &ms, d);
            for i in 0..d {
                dx[i] += weights[stage] * v[i];
                for j in 0..d {
                    dm[i][j] += weights[stage] * km[i][j];
                }
            }
            if stage < 3 {
                let h = offsets[stage] * dt;
                for i in 0..d {
                    xs[i] = x0[i] + h * v[i];
                    for j in 0..d {
                        ms[i][j] = m0[i][j] + h * km[i][j];
                    }
                }
            }
        }
        for i in 0..d {
            ens.positions[p][i] = (x0[i] + dt / 6.0 * dx[i]).rem_euclid(tau);
            for j in 0..d {
                ens.tangents[p][i][j] = m0[i][j] + dt / 6.0 * dm[i][j];
            }
        }
    }
    ens.t += dt;
}

/// Log-stretch snapshots taken at every renormalization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LagrangianHistory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// per checkpoint, per particle accumulated `log R_ii`
    pub log_sums: Vec<Vec<[f64; 3]>>,
    pub t_qr: f64,
}

/// Couples an ensemble to a velocity path with periodic QR renormalization.
pub struct LagrangianTracker {
    pub ensemble: ParticleEnsemble,
    pub history: LagrangianHistory,
    qr_every: u64,
    steps: u64,
    mode_tol: f64,
    interpolation: Interpolation,
}

impl LagrangianTracker {
    pub fn new(ensemble: ParticleEnsemble, t_qr: f64, dt: f64, mode_tol: f64) -> Result<Self, LagrangianError> {
        let ratio = t_qr / dt;
        let qr_every = ratio.round();
        if !(qr_every >= 1.0) || (ratio - qr_every).abs() > 1e-6 * ratio {
            return Err(LagrangianError::Cadence);
        }
        let dim = ensemble.dim;
        let first = (0..ensemble.len()).map(|_| [0.0; 3]).collect();
        Ok(LagrangianTracker {
            ensemble,
            history: LagrangianHistory { dim, times: vec![0.0], log_sums: vec![first], t_qr },
            qr_every: qr_every as u64,
            steps: 0,
            mode_tol,
            interpolation: Interpolation::Exact,
        })
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn step(&mut self, u: &SpectralField, dt: f64) {
        match self.interpolation {
            Interpolation::Exact => advect(&mut self.ensemble, &VelocityEvaluator::new(u, self.mode_tol), dt),
            Interpolation::Bilinear => advect(&mut self.ensemble, &BilinearEvaluator::new(u), dt),
        }
        self.steps += 1;
        if self.steps.is_multiple_of(self.qr_every) {
            self.ensemble.renormalize();
            let snap = self.ensemble.log_sums.iter().map(|s| [s[0].value(), s[1].value(), s[2].value()]).collect();
            self.history.times.push(self.ensemble.t);
            self.history.log_sums.push(snap);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub t: f64,
    /// median over particles of `log R_ii / t`, per direction
    pub lambda: Vec<f64>,
    /// 95% bootstrap interval of each median
    pub ci: Vec<(f64, f64)>,
    /// median of the per-particle exponent sums
    pub sum: f64,
    pub sum_ci: (f64, f64),
    pub particles: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

pub fn estimate_lyapunov(history: &LagrangianHistory, seed: u64) -> Result<LyapunovEstimate, LagrangianError> {
    let t = history.times.last().copied().unwrap_or(0.0);
    let min = 10.0 * history.t_qr;
    if t < min * (1.0 - 1e-9) || history.log_sums.is_empty() {
        return Err(LagrangianError::ShortHorizon { t, min });
    }
    let last = history.log_sums.last().unwrap();
    let d = history.dim;
    let mut stream = NoiseStream::derive(seed, crate::forcing::purpose::BOOTSTRAP, 0);
    let mut lambda = Vec::new();
    let mut ci = Vec::new();
    for i in 0..d {
        let v: Vec<f64> = last.iter().map(|s| s[i] / t).collect();
        lambda.push(median(&v));
        ci.push(bootstrap_median_ci(&v, BOOTSTRAP_RESAMPLES, 0.95, &mut stream));
    }
    let sums: Vec<f64> = last.iter().map(|s| s[..d].iter().sum::<f64>() / t).collect();
    Ok(LyapunovEstimate {
        t,
        lambda,
        ci,
        sum: median(&sums),
        sum_ci: bootstrap_median_ci(&sums, BOOTSTRAP_RESAMPLES, 0.95, &mut stream),
        particles: last.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub p: f64,
    /// `Λ(p)`
    pub lambda: f64,
    pub r2: f64,
    /// fit window `[t_start, t_end]`
    pub window: (f64, f64),
}

/// Recommended ensemble size for moment estimates.
pub const MOMENT_MIN_PARTICLES: usize = 1000;

/// `Λ(p) = −d/dt log E exp(−p ℓ₁(t))`, fitted over the second half of the
/// checkpoints; `ℓ₁` is the leading accumulated log-stretch. Returns the
/// table (with `Λ(0) = 0` first) and any warnings.
pub fn estimate_moment_lyapunov(
    history: &LagrangianHistory,
    p_values: &[f64],
) -> Result<(Vec<MomentEstimate>, Vec<String>), LagrangianError> {
    let times = &history.times;
    let distinct = times.windows(2).filter(|w| w[1] > w[0]).count();
    if distinct < 1 || history.log_sums.iter().any(|c| c.is_empty()) {
        return Err(LagrangianError::Degenerate);
    }
    if history.log_sums.iter().flatten().any(|s| !s[0].is_finite()) {
        return Err(LagrangianError::Degenerate);
    }
    let mut warnings = Vec::new();
    let particles = history.log_sums[0].len();
    if particles < MOMENT_MIN_PARTICLES {
        warnings.push(format!(
            "moment exponents from {particles} particles; at least {MOMENT_MIN_PARTICLES} are recommended"
        ));
    }
    let start = times.len() / 2;
    let start = start.min(times.len() - 2);
    let window = (times[start], *times.last().unwrap());
    let mut out = vec![MomentEstimate { p: 0.0, lambda: 0.0, r2: 1.0, window }];
    for &p in p_values {
        if !(p > 0.0 && p <= 1.0) {
            return Err(LagrangianError::MomentOrder(p));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (c, t) in history.log_sums.iter().zip(times).skip(start) {
            let top = c.iter().map(|s| -p * s[0]).fold(f64::NEG_INFINITY, f64::max);
            let mean = c.iter().map(|s| (-p * s[0] - top).exp()).sum::<f64>() / c.len() as f64;
            xs.push(*t);
            ys.push(-(top + mean.ln()));
        }
        let fit = linear_fit(&xs, &ys).ok_or(LagrangianError::Degenerate)?;
        out.push(MomentEstimate { p, lambda: fit.slope, r2: fit.r2, window });
    }
    Ok((out, warnings))
}
