//! Stochastic fluid models stepped by an exponential integrator: the linear
//! part exactly, the nonlinearity by Euler, and the additive noise with its
//! exact per-mode variance.

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::forcing::{ForcingError, ForcingSpec, NoiseStream, OuStep};
use crate::spectral::{
    curl2d, dealias_in_place, galerkin_projection, project_leray_in_place, sobolev_norm, BasisMode, Complex64, Grid,
    Rank, SpectralError, SpectralField, Transform,
};

#[derive(Debug, Error)]
pub enum FluidError {
    #[error("CFL violated: max|u| = {umax:.4e} allows dt <= {limit:.4e}, got dt = {dt:.4e}")]
    Cfl { umax: f64, dt: f64, limit: f64 },
    #[error("non-finite velocity after step {step}")]
    NotFinite { step: u64 },
    #[error("invalid fluid model: {0}")]
    Model(String),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Coloured-in-time forcing through a tower of OU processes.
#[derive(Clone, Debug)]
pub struct TowerSpec {
    /// velocity lives on `|m|_∞ ≤ n`
    pub n: usize,
    /// tower variables live on `|m|_∞ ≤ m`
    pub m: usize,
    /// per-mode drift matrix, shared by every mode
    pub a: DMatrix<f64>,
    /// noise amplitude entering the last tower level of every mode
    pub gamma: f64,
    /// use the Galerkin-truncated Navier–Stokes nonlinearity instead of zero
    pub nonlinear: bool,
}

#[derive(Clone, Debug)]
pub enum FluidKind {
    /// 2D Navier–Stokes, `A = −νΔ`
    Nse2d,
    /// 3D hyperviscous Navier–Stokes, `A = −ν'Δ + νΔ²`
    Hvnse3d,
    /// linear Stokes system, no nonlinearity
    Stokes,
    /// Navier–Stokes projected on `|m|_∞ ≤ N`
    Galerkin(usize),
    OuTower(TowerSpec),
}

impl FluidKind {
    pub fn name(&self) -> &'static str {
        match self {
            FluidKind::Nse2d => "nse2d",
            FluidKind::Hvnse3d => "hvnse3d",
            FluidKind::Stokes => "stokes",
            FluidKind::Galerkin(_) => "galerkin",
            FluidKind::OuTower(_) => "ou_tower",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FluidModel {
    pub kind: FluidKind,
    pub nu: f64,
    /// Laplacian coefficient of the 3D hyperviscous operator
    pub nu_prime: f64,
    pub cfl: f64,
}

impl FluidModel {
    pub fn new(kind: FluidKind, nu: f64) -> Self {
        FluidModel { kind, nu, nu_prime: 0.0, cfl: 0.5 }
    }

    /// Symbol `λ(|k|²)` of the linear operator `A`.
    pub fn symbol(&self, k2: f64) -> f64 {
        match self.kind {
            FluidKind::Hvnse3d => self.nu_prime * k2 + self.nu * k2 * k2,
            _ => self.nu * k2,
        }
    }

    fn has_nonlinearity(&self) -> bool {
        match &self.kind {
            FluidKind::Nse2d | FluidKind::Hvnse3d | FluidKind::Galerkin(_) => true,
            FluidKind::Stokes => false,
            FluidKind::OuTower(t) => t.nonlinear,
        }
    }

    fn cube(&self) -> Option<usize> {
        match &self.kind {
            FluidKind::Galerkin(n) => Some(*n),
            FluidKind::OuTower(t) => Some(t.n),
            _ => None,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<(), FluidError> {
        let bad = |s: String| Err(FluidError::Model(s));
        if !(self.nu > 0.0) {
            return bad(format!("viscosity must be positive, got {}", self.nu));
        }
        if self.nu_prime < 0.0 {
            return bad(format!("nu_prime must be nonnegative, got {}", self.nu_prime));
        }
        if !(self.cfl > 0.0) {
            return bad(format!("CFL constant must be positive, got {}", self.cfl));
        }
        match &self.kind {
            FluidKind::Nse2d if grid.dim() != 2 => bad("nse2d needs d = 2".into()),
            FluidKind::Hvnse3d if grid.dim() != 3 => bad("hvnse3d needs d = 3".into()),
            FluidKind::Galerkin(n) if *n < 2 || *n > grid.k_max_dealiased() => {
                bad(format!("Galerkin cutoff {n} must lie in [2, {}]", grid.k_max_dealiased()))
            }
            FluidKind::OuTower(t) if t.n < 2 || t.n > t.m || t.m > grid.k_max_dealiased() => bad(format!(
                "tower cutoffs need 2 <= N <= M <= {}, got N = {}, M = {}",
                grid.k_max_dealiased(),
                t.n,
                t.m
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub u: SpectralField,
    pub t: f64,
    pub step: u64,
    /// tower variables, `levels` consecutive entries per tower mode
    pub z: Vec<f64>,
}

impl FluidState {
    pub fn at_rest(grid: &Grid) -> Self {
        FluidState { u: SpectralField::vector(grid), t: 0.0, step: 0, z: Vec::new() }
    }

    pub fn from_velocity(u: SpectralField) -> Self {
        FluidState { u, t: 0.0, step: 0, z: Vec::new() }
    }
}

struct TowerMode {
    mode: BasisMode,
    /// augmented `(u^m, Z^m)` step when the mode carries velocity
    coupled: bool,
    step: OuStep,
}

struct Tower {
    levels: usize,
    modes: Vec<TowerMode>,
}

/// Time stepper for one trajectory. Owns its FFT plans and noise stream.
pub struct FluidStepper {
    model: FluidModel,
    grid: Grid,
    dt: f64,
    forcing: Option<ForcingSpec>,
    stream: NoiseStream,
    transform: Transform,
    decay: Vec<f64>,
    noise_sd: Vec<f64>,
    tower: Option<Tower>,
    real: Vec<Vec<f64>>,
    prod: Vec<f64>,
    tmp: Vec<Complex64>,
    last_umax: f64,
}

impl FluidStepper {
    pub fn new(
        model: FluidModel,
        grid: &Grid,
        forcing: Option<ForcingSpec>,
        dt: f64,
        stream: NoiseStream,
    ) -> Result<Self, FluidError> {
        model.validate(grid)?;
        if !(dt > 0.0) {
            return Err(FluidError::Model(format!("time step must be positive, got {dt}")));
        }
        if let Some(f) = &forcing {
            if f.grid() != grid {
                return Err(SpectralError::GridMismatch(f.grid().clone(), grid.clone()).into());
            }
            if let Some(n) = model.cube() {
                if let Some(m) = f.modes().iter().find(|m| m.k.iter().any(|c| c.unsigned_abs() as usize > n)) {
                    return Err(FluidError::Model(format!("forced mode {:?} lies outside |m| <= {n}", m.k)));
                }
            }
            if !matches!(model.kind, FluidKind::Nse2d | FluidKind::Hvnse3d) {
                let active: std::collections::HashSet<_> = f.modes().iter().copied().collect();
                if let Some(m) = crate::forcing::modes_in_cube(grid.dim(), 2).into_iter().find(|m| !active.contains(m))
                {
                    return Err(FluidError::Model(format!(
                        "finite-dimensional models need every |m| <= 2 forced; {:?} (polarization {}) is not",
                        m.k, m.pol
                    )));
                }
            }
        }
        let decay = (0..grid.spectral_len()).map(|s| (-model.symbol(grid.k_squared(s)) * dt).exp()).collect();
        let noise_sd = match &forcing {
            Some(f) => f
                .modes()
                .iter()
                .zip(f.q())
                .map(|(m, q)| {
                    let lam = model.symbol(m.norm_k().powi(2));
                    q * ((1.0 - (-2.0 * lam * dt).exp()) / (2.0 * lam)).sqrt()
                })
                .collect(),
            None => Vec::new(),
        };
        let tower = match &model.kind {
            FluidKind::OuTower(spec) => Some(Self::build_tower(&model, spec, forcing.as_ref(), grid, dt)?),
            _ => None,
        };
        let d = grid.dim();
        Ok(FluidStepper {
            model,
            grid: grid.clone(),
            dt,
            forcing,
            stream,
            transform: Transform::new(grid),
            decay,
            noise_sd,
            tower,
            real: vec![vec![0.0; grid.real_len()]; d],
            prod: vec![0.0; grid.real_len()],
            tmp: vec![Complex64::new(0.0, 0.0); grid.spectral_len()],
            last_umax: 0.0,
        })
    }

    fn build_tower(
        model: &FluidModel,
        spec: &TowerSpec,
        forcing: Option<&ForcingSpec>,
        grid: &Grid,
        dt: f64,
    ) -> Result<Tower, FluidError> {
        let levels = spec.a.nrows();
        if levels == 0 || spec.a.ncols() != levels {
            return Err(FluidError::Model("tower drift matrix must be square and nonempty".into()));
        }
        let q: HashMap<BasisMode, f64> = match forcing {
            Some(f) => f.modes().iter().copied().zip(f.q().iter().copied()).collect(),
            None => HashMap::new(),
        };
        let mut modes = Vec::new();
        for mode in crate::forcing::modes_in_cube(grid.dim(), spec.m) {
            let coupled = mode.k.iter().all(|c| c.unsigned_abs() as usize <= spec.n);
            let step = if coupled {
                let size = levels + 1;
                let mut a = DMatrix::zeros(size, size);
                a[(0, 0)] = model.symbol(mode.norm_k().powi(2));
                a[(0, 1)] = -q.get(&mode).copied().unwrap_or(0.0);
                a.view_mut((1, 1), (levels, levels)).copy_from(&spec.a);
                let mut g = DMatrix::zeros(size, 1);
                g[(size - 1, 0)] = spec.gamma;
                OuStep::new(&a, &g, dt)?
            } else {
                let mut g = DMatrix::zeros(levels, 1);
                g[(levels - 1, 0)] = spec.gamma;
                OuStep::new(&spec.a, &g, dt)?
            };
            modes.push(TowerMode { mode, coupled, step });
        }
        Ok(Tower { levels, modes })
    }

    pub fn model(&self) -> &FluidModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn forcing(&self) -> Option<&ForcingSpec> {
        self.forcing.as_ref()
    }

    pub fn stream(&self) -> &NoiseStream {
        &self.stream
    }

    pub fn stream_mut(&mut self) -> &mut NoiseStream {
        &mut self.stream
    }

    /// `max|u|` seen by the last nonlinear evaluation.
    pub fn last_umax(&self) -> f64 {
        self.last_umax
    }

    /// Largest time step allowed by the CFL rule for speed `umax`.
    pub fn cfl_limit(&self, umax: f64) -> f64 {
        self.model.cfl * self.grid.dx() / umax
    }

    /// Tower storage sized for this model (empty unless it is an OU tower).
    pub fn initial_tower(&self) -> Vec<f64> {
        match &self.tower {
            Some(t) => vec![0.0; t.levels * t.modes.len()],
            None => Vec::new(),
        }
    }

    /// Pointwise `max|u|` on the grid.
    pub fn max_velocity(&mut self, u: &SpectralField) -> f64 {
        self.load_real(u);
        self.real_umax()
    }

    fn load_real(&mut self, u: &SpectralField) {
        for j in 0..self.grid.dim() {
            self.transform.backward(u.comp(j), &mut self.real[j]).expect("grid fixed");
        }
    }

    fn real_umax(&self) -> f64 {
        let mut m2 = 0.0f64;
        for p in 0..self.grid.real_len() {
            let s: f64 = self.real.iter().map(|r| r[p] * r[p]).sum();
            m2 = m2.max(s);
        }
        m2.sqrt()
    }

    /// `B(u,u)`: Leray projection of `∇·(u⊗u)`, dealiased (and cube-projected
    /// for the Galerkin models).
    pub fn nonlinear_term(&mut self, u: &SpectralField) -> SpectralField {
        let mut out = SpectralField::vector(&self.grid);
        self.nonlinear_into(u, &mut out);
        out
    }

    fn nonlinear_into(&mut self, u: &SpectralField, out: &mut SpectralField) {
        let g = self.grid.clone();
        let d = g.dim();
        self.load_real(u);
        self.last_umax = self.real_umax();
        out.set_zero();
        for i in 0..d {
            for j in i..d {
                for p in 0..g.real_len() {
                    self.prod[p] = self.real[i][p] * self.real[j][p];
                }
                self.transform.forward_dealiased(&self.prod, &mut self.tmp).expect("grid fixed");
                for s in 0..g.spectral_len() {
                    let k = g.wave(s);
                    let t = self.tmp[s];
                    out.comp_mut(i)[s] += Complex64::new(0.0, k[j] as f64) * t;
                    if i != j {
                        out.comp_mut(j)[s] += Complex64::new(0.0, k[i] as f64) * t;
                    }
                }
            }
        }
        project_leray_in_place(out);
        if let Some(n) = self.model.cube() {
            *out = galerkin_projection(out, n);
        }
    }

    /// Draws the stochastic convolution increment `∫ e^{−(dt−s)A} Q dW_s` of
    /// one step (white-noise models only).
    pub fn sample_noise(&mut self) -> SpectralField {
        let mut out = SpectralField::vector(&self.grid);
        if let Some(f) = &self.forcing {
            let mut xi = vec![0.0; f.modes().len()];
            self.stream.fill_normals(&mut xi);
            for (x, sd) in xi.iter_mut().zip(&self.noise_sd) {
                *x *= sd;
            }
            f.add_modes(&mut out, &xi);
        }
        out
    }

    /// `e^{−A dt}` as a per-index table.
    pub fn decay_table(&self) -> &[f64] {
        &self.decay
    }

    pub fn step(&mut self, state: &mut FluidState) -> Result<(), FluidError> {
        if self.tower.is_some() {
            return self.step_tower(state);
        }
        let noise = self.sample_noise();
        self.step_with_noise(state, &noise)
    }

    /// One step with a caller-supplied stochastic convolution increment.
    pub fn step_with_noise(&mut self, state: &mut FluidState, noise: &SpectralField) -> Result<(), FluidError> {
        if self.model.has_nonlinearity() {
            let mut b = SpectralField::vector(&self.grid);
            self.nonlinear_into(&state.u, &mut b);
            self.check_cfl()?;
            state.u.axpy(-self.dt, &b);
        }
        let decay = &self.decay;
        state.u.apply_symbol(|s| decay[s]);
        state.u.axpy(1.0, noise);
        self.finish(state)
    }

    fn check_cfl(&self) -> Result<(), FluidError> {
        let limit = self.cfl_limit(self.last_umax);
        if self.dt > limit {
            return Err(FluidError::Cfl { umax: self.last_umax, dt: self.dt, limit });
        }
        Ok(())
    }

    fn finish(&mut self, state: &mut FluidState) -> Result<(), FluidError> {
        project_leray_in_place(&mut state.u);
        dealias_in_place(&mut state.u);
        if let Some(n) = self.model.cube() {
            state.u = galerkin_projection(&state.u, n);
        }
        state.step += 1;
        state.t = state.step as f64 * self.dt;
        if !state.u.is_finite() {
            return Err(FluidError::NotFinite { step: state.step });
        }
        Ok(())
    }

    fn step_tower(&mut self, state: &mut FluidState) -> Result<(), FluidError> {
        let levels = self.tower.as_ref().map(|t| t.levels).unwrap_or(0);
        if state.z.len() != levels * self.tower.as_ref().map(|t| t.modes.len()).unwrap_or(0) {
            state.z = self.initial_tower();
        }
        if self.model.has_nonlinearity() {
            let mut b = SpectralField::vector(&self.grid);
            self.nonlinear_into(&state.u, &mut b);
            self.check_cfl()?;
            state.u.axpy(-self.dt, &b);
        }
        let tower = self.tower.take().expect("tower model");
        let total: usize = tower.modes.iter().map(|m| m.step.dim()).sum();
        let mut xi = vec![0.0; total];
        self.stream.fill_normals(&mut xi);
        let mut next = SpectralField::vector(&self.grid);
        let mut offset = 0;
        let mut buf = Vec::with_capacity(levels + 1);
        for (i, tm) in tower.modes.iter().enumerate() {
            let z = &mut state.z[i * levels..(i + 1) * levels];
            let dim = tm.step.dim();
            buf.clear();
            if tm.coupled {
                buf.push(tm.mode.coefficient(&state.u));
            }
            buf.extend_from_slice(z);
            tm.step.apply(&mut buf, &xi[offset..offset + dim]);
            offset += dim;
            if tm.coupled {
                tm.mode.add_to(&mut next, buf[0])?;
                z.copy_from_slice(&buf[1..]);
            } else {
                z.copy_from_slice(&buf);
            }
        }
        self.tower = Some(tower);
        state.u = next;
        self.finish(state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidObservables {
    /// `½‖u‖²`
    pub energy: f64,
    /// `½‖curl u‖²`
    pub enstrophy: f64,
    /// `‖u‖_{H^σ}`
    pub h_sigma: f64,
}

pub fn fluid_observables(u: &SpectralField, sigma: f64) -> FluidObservables {
    let g = u.grid().clone();
    FluidObservables {
        energy: 0.5 * u.norm_l2_squared(),
        enstrophy: 0.5 * u.weighted_energy(|s| g.k_squared(s)),
        h_sigma: sobolev_norm(u, sigma),
    }
}

/// Midpoint of the admissible interval `(max(α − 2(d−1), d/2 + 3), α − d/2)`
/// for the Sobolev index of the strong norm.
pub fn default_sigma(alpha: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let lo = (alpha - 2.0 * (d - 1.0)).max(d / 2.0 + 3.0);
    let hi = alpha - d / 2.0;
    0.5 * (lo + hi)
}

/// `‖u‖_W`: `‖curl u‖` in 2D, `‖u‖` in 3D.
pub fn w_norm(u: &SpectralField) -> f64 {
    if u.grid().dim() == 2 {
        curl2d(u).norm_l2()
    } else {
        u.norm_l2()
    }
}

/// `log V_{β,η}(u) = β log(1 + ‖u‖²_{H^σ}) + η‖u‖²_W`.
pub fn log_lyapunov_function(u: &SpectralField, beta: f64, eta: f64, sigma: f64) -> f64 {
    assert_eq!(u.rank(), Rank::Vector);
    let h = sobolev_norm(u, sigma);
    beta * (1.0 + h * h).ln() + eta * w_norm(u).powi(2)
}

pub fn lyapunov_function(u: &SpectralField, beta: f64, eta: f64, sigma: f64) -> f64 {
    log_lyapunov_function(u, beta, eta, sigma).exp()
}

/// `η* = ν/𝒬` with `𝒬 = 64 sup|k|q_m` in 2D and `64 sup q_m` in 3D.
pub fn eta_star(nu: f64, forcing: &ForcingSpec) -> f64 {
    let q = if forcing.grid().dim() == 2 { forcing.sup_k_q() } else { forcing.sup_q() };
    nu / (64.0 * q)
}

/// Warning text when `η` is outside the range where the drift bound holds.
pub fn eta_warning(eta: f64, nu: f64, forcing: &ForcingSpec) -> Option<String> {
    let star = eta_star(nu, forcing);
    (eta >= star).then(|| format!("eta = {eta:.3e} >= eta* = {star:.3e}; the Lyapunov drift bound is not guaranteed"))
}
