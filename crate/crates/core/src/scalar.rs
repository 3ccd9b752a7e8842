//! Passive scalar `∂g + u·∇g − κΔg = b β̇`: integrating-factor RK4 for
//! diffusion and advection, with the source added at the end of each step.

use thiserror::Error;

use crate::fluid::{FluidError, FluidState, FluidStepper};
use crate::forcing::{NoiseStream, ScalarSourceSpec};
use crate::spectral::{sobolev_norm, Complex64, Grid, SpectralField, Transform};

#[derive(Debug, Error)]
pub enum ScalarError {
    #[error("Eulerian stepping needs kappa > 0 (got {0}); the kappa -> 0 regime is studied through kappa sweeps, the strain model and particle tracking")]
    ZeroKappa(f64),
    #[error("time step must be positive, got {0}")]
    Step(f64),
    #[error("CFL violated: max|u| = {umax:.4e} allows dt <= {limit:.4e}, got dt = {dt:.4e}")]
    Cfl { umax: f64, dt: f64, limit: f64 },
    #[error("non-finite scalar after step {step}")]
    NotFinite { step: u64 },
    #[error("scalar field must be a rank-1 field on the stepper grid")]
    Shape,
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarState {
    pub g: SpectralField,
    pub kappa: f64,
    pub t: f64,
    pub step: u64,
    pub source_on: bool,
}

impl ScalarState {
    pub fn new(g: SpectralField, kappa: f64, source_on: bool) -> Self {
        ScalarState { g, kappa, t: 0.0, step: 0, source_on }
    }
}

/// Outcome of the resolution rule `3κ^{−1/2} ≤ n`.
#[derive(Clone, Debug, PartialEq)]
pub enum Resolution {
    Adequate,
    /// inside the rule but with less than a 1.5x margin below `k_max`
    Marginal(String),
    Violated(String),
}

pub fn check_resolution(kappa: f64, grid: &Grid) -> Resolution {
    let kd = kappa.powf(-0.5);
    let n = grid.n() as f64;
    let kmax = grid.k_max_dealiased() as f64;
    if 3.0 * kd > n {
        Resolution::Violated(format!(
            "kappa = {kappa:.3e} puts the diffusive wavenumber {kd:.1} beyond n/3 = {:.1} on an n = {} grid",
            n / 3.0,
            grid.n()
        ))
    } else if 1.5 * kd > kmax {
        Resolution::Marginal(format!(
            "kappa = {kappa:.3e}: diffusive wavenumber {kd:.1} is within a 1.5x margin of k_max = {kmax}"
        ))
    } else {
        Resolution::Adequate
    }
}

/// Stepper for one scalar at one diffusivity.
pub struct ScalarStepper {
    grid: Grid,
    kappa: f64,
    dt: f64,
    cfl: f64,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
    source: Option<ScalarSourceSpec>,
    stream: NoiseStream,
    transform: Transform,
    stage_u: Vec<Vec<f64>>,
    grad: Vec<f64>,
    acc: Vec<f64>,
    tmp: Vec<Complex64>,
    advection: SpectralField,
    last_beta: f64,
    stages: [Vec<Complex64>; 5],
}

impl ScalarStepper {
    pub fn new(
        grid: &Grid,
        kappa: f64,
        dt: f64,
        source: Option<ScalarSourceSpec>,
        stream: NoiseStream,
    ) -> Result<Self, ScalarError> {
        if !(kappa > 0.0) {
            return Err(ScalarError::ZeroKappa(kappa));
        }
        if !(dt > 0.0) {
            return Err(ScalarError::Step(dt));
        }
        let e_full = grid.k_squared_table().iter().map(|k2| (-kappa * k2 * dt).exp()).collect();
        let e_half = grid.k_squared_table().iter().map(|k2| (-kappa * k2 * dt / 2.0).exp()).collect();
        Ok(ScalarStepper {
            grid: grid.clone(),
            kappa,
            dt,
            cfl: 0.5,
            e_full,
            e_half,
            source,
            stream,
            transform: Transform::new(grid),
            stage_u: vec![vec![0.0; grid.real_len()]; grid.dim()],
            grad: vec![0.0; grid.real_len()],
            acc: vec![0.0; grid.real_len()],
            tmp: vec![Complex64::new(0.0, 0.0); grid.spectral_len()],
            advection: SpectralField::scalar(grid),
            last_beta: 0.0,
            stages: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); grid.spectral_len()]),
        })
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn source(&self) -> Option<&ScalarSourceSpec> {
        self.source.as_ref()
    }

    pub fn stream(&self) -> &NoiseStream {
        &self.stream
    }

    pub fn stream_mut(&mut self) -> &mut NoiseStream {
        &mut self.stream
    }

    /// Dealiased `u·∇g` at the start of the last step (zero if it was skipped).
    pub fn last_advection(&self) -> &SpectralField {
        &self.advection
    }

    /// Brownian increment `Δβ` added in the last step.
    pub fn last_beta_increment(&self) -> f64 {
        self.last_beta
    }

    /// `−Π(U·∇g)` with `U` the velocity currently in `stage_u`.
    fn rhs(&mut self, g: &[Complex64], out: &mut [Complex64]) {
        let gr = &self.grid;
        let d = gr.dim();
        let half = (gr.n() / 2) as i32;
        self.acc.fill(0.0);
        for j in 0..d {
            for s in 0..gr.spectral_len() {
                let k = gr.wave(s)[j];
                self.tmp[s] =
                    if k.abs() == half { Complex64::new(0.0, 0.0) } else { g[s] * Complex64::new(0.0, k as f64) };
            }
            self.transform.backward(&self.tmp, &mut self.grad).expect("grid fixed");
            for ((a, u), dg) in self.acc.iter_mut().zip(&self.stage_u[j]).zip(&self.grad) {
                *a += u * dg;
            }
        }
        self.transform.forward_dealiased(&self.acc, out).expect("grid fixed");
        for v in out.iter_mut() {
            *v = -*v;
        }
    }

    fn set_stage_velocity(&mut self, u0: &[Vec<f64>], u1: &[Vec<f64>], c: f64) {
        for j in 0..self.grid.dim() {
            for ((s, a), b) in self.stage_u[j].iter_mut().zip(&u0[j]).zip(&u1[j]) {
                *s = (1.0 - c) * a + c * b;
            }
        }
    }

    /// Advances `state` by one step. `u0` and `u1` are real-space velocity
    /// components at the start and end of the step; stage velocities are
    /// interpolated linearly between them.
    pub fn step(&mut self, state: &mut ScalarState, u0: &[Vec<f64>], u1: &[Vec<f64>]) -> Result<(), ScalarError> {
        if state.g.grid() != &self.grid || state.g.n_components() != 1 {
            return Err(ScalarError::Shape);
        }
        let umax = max_speed(u0).max(max_speed(u1));
        if umax > 0.0 {
            let limit = self.cfl * self.grid.dx() / umax;
            if self.dt > limit {
                return Err(ScalarError::Cfl { umax, dt: self.dt, limit });
            }
        }
        let len = self.grid.spectral_len();
        let dt = self.dt;
        let g = state.g.comp_mut(0);
        if umax == 0.0 {
            for (v, e) in g.iter_mut().zip(&self.e_full) {
                *v *= e;
            }
            self.advection.set_zero();
        } else {
            let [mut k1, mut k2, mut k3, mut k4, mut stage] = std::mem::take(&mut self.stages);
            self.set_stage_velocity(u0, u1, 0.0);
            self.rhs(g, &mut k1);
            for (a, k) in self.advection.comp_mut(0).iter_mut().zip(&k1) {
                *a = -*k;
            }
            self.set_stage_velocity(u0, u1, 0.5);
            for s in 0..len {
                stage[s] = self.e_half[s] * (g[s] + 0.5 * dt * k1[s]);
            }
            self.rhs(&stage, &mut k2);
            for s in 0..len {
                stage[s] = self.e_half[s] * g[s] + 0.5 * dt * k2[s];
            }
            self.rhs(&stage, &mut k3);
            self.set_stage_velocity(u0, u1, 1.0);
            for s in 0..len {
                stage[s] = self.e_full[s] * g[s] + dt * self.e_half[s] * k3[s];
            }
            self.rhs(&stage, &mut k4);
            for s in 0..len {
                let (ef, eh) = (self.e_full[s], self.e_half[s]);
                g[s] = ef * g[s] + dt / 6.0 * (ef * k1[s] + 2.0 * eh * (k2[s] + k3[s]) + k4[s]);
            }
            self.stages = [k1, k2, k3, k4, stage];
        }
        self.last_beta = 0.0;
        if state.source_on {
            if let Some(src) = &self.source {
                let db = src.sample_beta_increment(dt, &mut self.stream);
                self.last_beta = db;
                for (v, b) in g.iter_mut().zip(src.b().comp(0)) {
                    *v += b * db;
                }
            }
        }
        state.step += 1;
        state.t = state.step as f64 * dt;
        if !state.g.is_finite() {
            return Err(ScalarError::NotFinite { step: state.step });
        }
        Ok(())
    }
}

fn max_speed(u: &[Vec<f64>]) -> f64 {
    let n = u.first().map(|c| c.len()).unwrap_or(0);
    let mut m = 0.0f64;
    for p in 0..n {
        m = m.max(u.iter().map(|c| c[p] * c[p]).sum());
    }
    m.sqrt()
}

/// Velocity supplied to a scalar run, sampled on the grid once per step.
pub trait VelocityPath {
    fn grid(&self) -> &Grid;
    fn dt(&self) -> f64;
    /// real-space velocity components at the current time
    fn current(&self) -> &[Vec<f64>];
    fn advance(&mut self) -> Result<(), ScalarError>;
}

/// A time-independent velocity (including `u ≡ 0`).
pub struct FrozenVelocity {
    grid: Grid,
    dt: f64,
    real: Vec<Vec<f64>>,
}

impl FrozenVelocity {
    pub fn new(u: &SpectralField, dt: f64) -> Self {
        let real = Transform::new(u.grid()).backward_field(u);
        FrozenVelocity { grid: u.grid().clone(), dt, real }
    }

    pub fn zero(grid: &Grid, dt: f64) -> Self {
        FrozenVelocity { grid: grid.clone(), dt, real: vec![vec![0.0; grid.real_len()]; grid.dim()] }
    }
}

impl VelocityPath for FrozenVelocity {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn current(&self) -> &[Vec<f64>] {
        &self.real
    }
    fn advance(&mut self) -> Result<(), ScalarError> {
        Ok(())
    }
}

/// A stochastic fluid trajectory driving the scalar.
pub struct FluidPath {
    stepper: FluidStepper,
    state: FluidState,
    transform: Transform,
    real: Vec<Vec<f64>>,
}

impl FluidPath {
    pub fn new(stepper: FluidStepper, state: FluidState) -> Self {
        let mut transform = Transform::new(stepper.grid());
        let real = transform.backward_field(&state.u);
        FluidPath { stepper, state, transform, real }
    }

    pub fn state(&self) -> &FluidState {
        &self.state
    }

    pub fn stepper(&self) -> &FluidStepper {
        &self.stepper
    }

    pub fn into_parts(self) -> (FluidStepper, FluidState) {
        (self.stepper, self.state)
    }
}

impl VelocityPath for FluidPath {
    fn grid(&self) -> &Grid {
        self.stepper.grid()
    }
    fn dt(&self) -> f64 {
        self.stepper.dt()
    }
    fn current(&self) -> &[Vec<f64>] {
        &self.real
    }
    fn advance(&mut self) -> Result<(), ScalarError> {
        self.stepper.step(&mut self.state)?;
        for j in 0..self.real.len() {
            self.transform.backward(self.state.u.comp(j), &mut self.real[j]).expect("grid fixed");
        }
        Ok(())
    }
}

/// Norms recorded along a source-free run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub hm1: f64,
    /// `‖∇g‖²`
    pub grad2: f64,
    pub mean: f64,
}

pub fn norm_sample(t: f64, g: &SpectralField) -> NormSample {
    let grid = g.grid().clone();
    NormSample {
        t,
        l2: g.norm_l2(),
        h1: sobolev_norm(g, 1.0),
        hm1: sobolev_norm(g, -1.0),
        grad2: g.weighted_energy(|s| grid.k_squared(s)),
        mean: g.mean(0),
    }
}

/// Source-free evolution `g_t = S^κ_t g₀` along `path` for `steps` steps,
/// recording norms every `every` steps (and at both ends).
pub fn apply_solution_operator(
    g0: &SpectralField,
    path: &mut dyn VelocityPath,
    kappa: f64,
    steps: u64,
    every: u64,
) -> Result<(ScalarState, Vec<NormSample>), ScalarError> {
    let grid = path.grid().clone();
    let mut stepper = ScalarStepper::new(&grid, kappa, path.dt(), None, NoiseStream::new(0, 0))?;
    let mut state = ScalarState::new(g0.clone(), kappa, false);
    let mut samples = vec![norm_sample(0.0, &state.g)];
    let every = every.max(1);
    let mut prev = path.current().to_vec();
    for i in 1..=steps {
        path.advance()?;
        stepper.step(&mut state, &prev, path.current())?;
        prev.clone_from_slice(path.current());
        if i % every == 0 || i == steps {
            samples.push(norm_sample(state.t, &state.g));
        }
    }
    Ok((state, samples))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HalfLife {
    Reached(f64),
    NotReached { final_ratio: f64 },
}

/// First time the `L²` norm falls below half its initial value, by linear
/// interpolation between samples.
pub fn half_life_from_samples(samples: &[NormSample]) -> HalfLife {
    let Some(first) = samples.first() else {
        return HalfLife::NotReached { final_ratio: f64::NAN };
    };
    let target = 0.5 * first.l2;
    for w in samples.windows(2) {
        if w[1].l2 < target {
            let f = (w[0].l2 - target) / (w[0].l2 - w[1].l2);
            return HalfLife::Reached(w[0].t + f * (w[1].t - w[0].t));
        }
    }
    let last = samples.last().unwrap();
    HalfLife::NotReached { final_ratio: last.l2 / first.l2 }
}

/// Runs the source-free flow until the `L²` norm halves or `max_steps` pass.
pub fn measure_half_life(
    g0: &SpectralField,
    path: &mut dyn VelocityPath,
    kappa: f64,
    max_steps: u64,
) -> Result<HalfLife, ScalarError> {
    let grid = path.grid().clone();
    let mut stepper = ScalarStepper::new(&grid, kappa, path.dt(), None, NoiseStream::new(0, 0))?;
    let mut state = ScalarState::new(g0.clone(), kappa, false);
    let mut samples = vec![norm_sample(0.0, &state.g)];
    let mut prev = path.current().to_vec();
    for _ in 0..max_steps {
        path.advance()?;
        stepper.step(&mut state, &prev, path.current())?;
        prev.clone_from_slice(path.current());
        samples.push(norm_sample(state.t, &state.g));
        if samples.last().unwrap().l2 < 0.5 * samples[0].l2 {
            break;
        }
    }
    Ok(half_life_from_samples(&samples))
}

/// Named initial conditions for mixing runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialScalar {
    /// `cos(k₀·x)` with `k₀ = (1, 0)`
    SingleMode,
    /// unit-variance random phases on `1 ≤ |k| ≤ 4`
    RandomBand,
    /// `sin x₁ sin x₂`
    Checkerboard,
}

impl InitialScalar {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single_mode" => Some(Self::SingleMode),
            "random_band" => Some(Self::RandomBand),
            "checkerboard" => Some(Self::Checkerboard),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SingleMode => "single_mode",
            Self::RandomBand => "random_band",
            Self::Checkerboard => "checkerboard",
        }
    }

    pub fn build(&self, grid: &Grid, stream: &mut NoiseStream) -> SpectralField {
        let mut g = SpectralField::scalar(grid);
        match self {
            Self::SingleMode => {
                g.add_mode(0, [1, 0, 0], Complex64::new(0.5, 0.0)).expect("on grid");
            }
            Self::Checkerboard => {
                // sin x₁ sin x₂ = ½cos(x₁−x₂) − ½cos(x₁+x₂)
                g.add_mode(0, [1, -1, 0], Complex64::new(0.25, 0.0)).expect("on grid");
                g.add_mode(0, [1, 1, 0], Complex64::new(-0.25, 0.0)).expect("on grid");
            }
            Self::RandomBand => {
                let len = grid.spectral_len();
                let mut xi = vec![0.0; 2 * len];
                stream.fill_normals(&mut xi);
                for s in 1..len {
                    let k2 = grid.k_squared(s);
                    if k2 <= 16.0 && grid.wave(s)[0] >= 0 {
                        let k = grid.wave(s);
                        let k = [k[0] as i64, k[1] as i64, k[2] as i64];
                        // count each ±k pair once
                        if k[0] == 0 && !crate::spectral::is_positive(k, grid.dim()) {
                            continue;
                        }
                        g.add_mode(0, k, Complex64::new(xi[2 * s], xi[2 * s + 1])).expect("on grid");
                    }
                }
                let norm = g.norm_l2();
                g.scale(1.0 / norm);
            }
        }
        g
    }
}
