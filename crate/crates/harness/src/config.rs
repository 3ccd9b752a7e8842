//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
//! Every key has a default, and [`RunConfig::canonical`] lists the effective
//! value of every key, which is what the run hash is computed from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bspc_core::fluid::{FluidKind, FluidModel, TowerSpec};
use bspc_core::forcing::{chain_matrix, ForcingSpec, ModeSet, ScalarSourceSpec};
use bspc_core::lagrangian::Interpolation;
use bspc_core::scalar::{check_resolution, InitialScalar, Resolution};
use bspc_core::spectral::{Complex64, Grid, SpectralField};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Schema: key, default, one-line description.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("grid.dim", "2", "spatial dimension, 2 or 3"),
    ("grid.n", "256", "points per axis, a power of two >= 8"),
    ("fluid.model", "nse2d", "nse2d | hvnse3d | stokes | galerkin | ou_tower"),
    ("fluid.nu", "0.1", "viscosity (bi-Laplacian coefficient for hvnse3d)"),
    ("fluid.nu_prime", "0", "Laplacian coefficient for hvnse3d"),
    ("fluid.dt", "4e-4", "time step shared by fluid, scalar and particles"),
    ("fluid.cfl", "0.5", "CFL constant c in dt <= c dx / max|u|"),
    ("galerkin.N", "8", "cube |m|_inf <= N kept by the galerkin model"),
    ("ou_tower.N", "4", "velocity cube of the ou_tower model"),
    ("ou_tower.M", "4", "tower cube (>= N)"),
    ("ou_tower.A", "chain:3", "per-mode tower drift: chain:<levels> or rows 'a,b;c,d'"),
    ("ou_tower.Gamma", "1", "noise amplitude on the last tower level"),
    ("ou_tower.nonlinear", "false", "add the Galerkin Navier-Stokes nonlinearity"),
    ("forcing.alpha", "5.5", "q_m = amplitude |k|^-alpha"),
    ("forcing.amplitude", "10", "overall noise amplitude"),
    ("forcing.mode_set", "full", "full | cube:<n>"),
    ("source.b", "preset", "preset (cos x1 + sin x2) or modes 'k1:k2[:k3]:re:im, ...'"),
    ("source.k_b", "2", "spectral support radius of b"),
    ("source.amplitude", "1", "multiplies b"),
    ("rng.seed", "1", "master seed"),
    ("scalar.kappa", "1e-3", "diffusivity when kappa_sweep is empty"),
    ("scalar.source_on", "true", "stochastic source in stationary runs"),
    ("scalar.g0", "single_mode", "initial scalar for mixing runs: single_mode | random_band | checkerboard"),
    ("scalar.allow_underresolved", "false", "run even when 3 kappa^-1/2 > n"),
    ("particles.count", "1000", "tracers in Lyapunov runs"),
    ("particles.t_qr", "0.5", "QR renormalization interval (multiple of dt)"),
    ("particles.seed", "", "seed for tracer placement; empty means rng.seed"),
    ("particles.interpolation", "exact", "exact | bilinear"),
    ("particles.mode_tol", "1e-6", "velocity modes below this fraction of the largest are skipped"),
    ("particles.moments", "0.1,0.25,0.5,1", "orders p of the moment exponents"),
    ("t_burn", "", "burn-in time; empty means t_average / 4"),
    ("t_average", "60", "averaging window of stationary runs"),
    ("diag_interval", "0.05", "time between diagnostic samples"),
    ("checkpoint_interval", "10", "time between snapshots"),
    ("ensemble_size", "4", "noise paths per kappa in mixing runs"),
    ("kappa_sweep", "1e-3,3e-4,1e-4", "diffusivities; empty means scalar.kappa"),
    ("output_dir", "out", "where CSVs, snapshots and the manifest go"),
    ("diag.flux_N", "8,16,32", "cutoffs for the flux budget"),
    ("diag.cutoff", "sharp", "sharp | smooth flux projection"),
    ("diag.yaglom_ell", "0.05,0.07,0.1,0.14,0.2,0.28,0.4,0.56,0.8", "increment lengths"),
    ("diag.yaglom_angles", "16", "directions per increment length"),
    ("mix.t_spinup", "5", "fluid spin-up before the first mixing member"),
    ("mix.t_mix", "20", "longest source-free window per member"),
    ("mix.sample_interval", "0.05", "time between norm samples"),
    ("mix.fit_floor", "1e-4", "lower end of the H^-1 fit window, relative to the initial value"),
    ("mix.fit_ceiling", "0.3", "upper end of the H^-1 fit window, relative to the initial value"),
    ("mix.control_n", "32", "grid of the u = 0 control (the heat flow is exact on any grid holding g0)"),
    ("mix.control_dt", "0.05", "u = 0 control step, in units of 1/kappa"),
    ("mix.control_t_max", "20", "u = 0 control horizon, in units of 1/kappa"),
    ("lyap.t_spinup", "5", "fluid spin-up before tracers are released"),
    ("lyap.t_run", "10", "tracking horizon"),
];

fn default_of(key: &str) -> &'static str {
    SCHEMA.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d).expect("schema key")
}

/// Parsed and validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub grid: Grid,
    pub model: FluidModel,
    pub dt: f64,
    pub forcing: ForcingSpec,
    pub source: ScalarSourceSpec,
    pub seed: u64,
    pub kappas: Vec<f64>,
    pub source_on: bool,
    pub g0: InitialScalar,
    pub particles: ParticleConfig,
    pub t_burn: f64,
    pub t_average: f64,
    pub diag_interval: f64,
    pub checkpoint_interval: f64,
    pub ensemble_size: usize,
    pub output_dir: PathBuf,
    pub flux_n: Vec<f64>,
    pub smooth_cutoff: bool,
    pub yaglom_ell: Vec<f64>,
    pub yaglom_angles: usize,
    pub mix: MixConfig,
    pub lyap_t_spinup: f64,
    pub lyap_t_run: f64,
    /// resolution notes for κ values that are marginal or allowed despite the rule
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ParticleConfig {
    pub count: usize,
    pub t_qr: f64,
    pub seed: u64,
    pub interpolation: Interpolation,
    pub mode_tol: f64,
    pub moments: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MixConfig {
    pub t_spinup: f64,
    pub t_mix: f64,
    pub sample_interval: f64,
    pub fit_floor: f64,
    pub fit_ceiling: f64,
    pub control_n: usize,
    pub control_dt: f64,
    pub control_t_max: f64,
}

fn bad(key: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(format!("{key}: {}", msg.into()))
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> &'a str {
        self.0.get(key).map(String::as_str).unwrap_or_else(|| default_of(key))
    }
    fn f64(&self, key: &str) -> Result<f64, HarnessError> {
        let v = self.raw(key);
        v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, format!("'{v}' is not a number")))
    }
    fn positive(&self, key: &str) -> Result<f64, HarnessError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(bad(key, "must be positive"))
        }
    }
    fn usize(&self, key: &str) -> Result<usize, HarnessError> {
        let v = self.raw(key);
        v.parse().map_err(|_| bad(key, format!("'{v}' is not a nonnegative integer")))
    }
    fn bool(&self, key: &str) -> Result<bool, HarnessError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(bad(key, format!("'{v}' is not a boolean"))),
        }
    }
    fn list(&self, key: &str) -> Result<Vec<f64>, HarnessError> {
        let v = self.raw(key).trim();
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(key, format!("'{s}' is not a number")))
            })
            .collect()
    }
}

fn parse_tower_matrix(v: &str) -> Result<DMatrix<f64>, HarnessError> {
    let key = "ou_tower.A";
    if let Some(levels) = v.strip_prefix("chain:") {
        let levels: usize = levels.trim().parse().map_err(|_| bad(key, "chain:<levels> needs an integer"))?;
        if levels == 0 {
            return Err(bad(key, "at least one level"));
        }
        return Ok(chain_matrix(levels));
    }
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad(key, format!("'{x}' is not a number"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let size = rows.len();
    if rows.iter().any(|r| r.len() != size) {
        return Err(bad(key, "matrix must be square"));
    }
    Ok(DMatrix::from_fn(size, size, |i, j| rows[i][j]))
}

fn parse_source(v: &str, grid: &Grid, k_b: f64, amplitude: f64) -> Result<ScalarSourceSpec, HarnessError> {
    let key = "source.b";
    let spec = if v.trim() == "preset" {
        ScalarSourceSpec::preset(grid, amplitude).map_err(|e| bad(key, e.to_string()))?
    } else {
        let mut b = SpectralField::scalar(grid);
        let d = grid.dim();
        for item in v.split(',') {
            let parts: Vec<f64> = item
                .split(':')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad(key, format!("'{x}' is not a number"))))
                .collect::<Result<_, _>>()?;
            if parts.len() != d + 2 {
                return Err(bad(key, format!("'{item}' needs {} fields", d + 2)));
            }
            let mut k = [0i64; 3];
            for j in 0..d {
                k[j] = parts[j] as i64;
            }
            let c = Complex64::new(amplitude * parts[d], amplitude * parts[d + 1]);
            b.add_mode(0, k, c).map_err(|e| bad(key, e.to_string()))?;
        }
        ScalarSourceSpec::new(b, k_b).map_err(|e| bad(key, e.to_string()))?
    };
    if spec.k_b() > k_b + 1e-12 {
        return Err(bad(key, format!("support radius {} exceeds source.k_b = {k_b}", spec.k_b())));
    }
    Ok(spec)
}

impl RunConfig {
    /// Parses `key = value` text; `overrides` are applied on top.
    pub fn parse<K: AsRef<str>>(text: &str, overrides: &[(K, String)]) -> Result<Self, HarnessError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if !SCHEMA.iter().any(|(s, _, _)| *s == k) {
                return Err(HarnessError::Config(format!("line {}: unknown key '{k}'", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        for (k, v) in overrides {
            let k = k.as_ref();
            if !SCHEMA.iter().any(|(s, _, _)| *s == k) {
                return Err(HarnessError::Config(format!("unknown key '{k}'")));
            }
            values.insert(k.to_string(), v.clone());
        }
        Self::from_values(values)
    }

    pub fn load<K: AsRef<str>>(path: &Path, overrides: &[(K, String)]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        Self::parse(&text, overrides)
    }

    fn from_values(values: BTreeMap<String, String>) -> Result<Self, HarnessError> {
        let r = Reader(&values);
        let dim = r.usize("grid.dim")?;
        let n = r.usize("grid.n")?;
        let grid = Grid::new(dim, n).map_err(|e| bad("grid", e.to_string()))?;
        let nu = r.positive("fluid.nu")?;
        let kind = match r.raw("fluid.model") {
            "nse2d" => FluidKind::Nse2d,
            "hvnse3d" => FluidKind::Hvnse3d,
            "stokes" => FluidKind::Stokes,
            "galerkin" => FluidKind::Galerkin(r.usize("galerkin.N")?),
            "ou_tower" => FluidKind::OuTower(TowerSpec {
                n: r.usize("ou_tower.N")?,
                m: r.usize("ou_tower.M")?,
                a: parse_tower_matrix(r.raw("ou_tower.A"))?,
                gamma: r.f64("ou_tower.Gamma")?,
                nonlinear: r.bool("ou_tower.nonlinear")?,
            }),
            other => return Err(bad("fluid.model", format!("unknown model '{other}'"))),
        };
        let mut model = FluidModel::new(kind, nu);
        model.nu_prime = r.f64("fluid.nu_prime")?;
        model.cfl = r.positive("fluid.cfl")?;
        let dt = r.positive("fluid.dt")?;

        let set = match r.raw("forcing.mode_set") {
            "full" => ModeSet::Full,
            s => match s.strip_prefix("cube:").and_then(|c| c.trim().parse().ok()) {
                Some(c) => ModeSet::Cube(c),
                None => return Err(bad("forcing.mode_set", format!("'{s}' is neither full nor cube:<n>"))),
            },
        };
        let forcing = ForcingSpec::power_law(&grid, set, r.f64("forcing.alpha")?, r.positive("forcing.amplitude")?)
            .map_err(|e| bad("forcing", e.to_string()))?;
        let source =
            parse_source(r.raw("source.b"), &grid, r.positive("source.k_b")?, r.positive("source.amplitude")?)?;
        let seed: u64 = r.raw("rng.seed").parse().map_err(|_| bad("rng.seed", "not an unsigned integer"))?;

        let mut kappas = r.list("kappa_sweep")?;
        if kappas.is_empty() {
            kappas.push(r.positive("scalar.kappa")?);
        }
        let allow = r.bool("scalar.allow_underresolved")?;
        let mut warnings = Vec::new();
        for &k in &kappas {
            if !(k > 0.0) {
                return Err(bad("kappa_sweep", "diffusivities must be positive"));
            }
            match check_resolution(k, &grid) {
                Resolution::Adequate => {}
                Resolution::Marginal(m) => warnings.push(m),
                Resolution::Violated(m) if allow => {
                    warnings.push(format!("{m} (allowed by scalar.allow_underresolved)"))
                }
                Resolution::Violated(m) => {
                    return Err(bad(
                        "kappa_sweep",
                        format!("{m}; raise grid.n or set scalar.allow_underresolved = true"),
                    ))
                }
            }
        }
        let g0 = InitialScalar::parse(r.raw("scalar.g0")).ok_or_else(|| bad("scalar.g0", "unknown preset"))?;

        let pseed = match r.raw("particles.seed") {
            "" => seed,
            s => s.parse().map_err(|_| bad("particles.seed", "not an unsigned integer"))?,
        };
        let interpolation = match r.raw("particles.interpolation") {
            "exact" => Interpolation::Exact,
            "bilinear" => Interpolation::Bilinear,
            s => return Err(bad("particles.interpolation", format!("'{s}' is neither exact nor bilinear"))),
        };
        let particles = ParticleConfig {
            count: r.usize("particles.count")?,
            t_qr: r.positive("particles.t_qr")?,
            seed: pseed,
            interpolation,
            mode_tol: r.f64("particles.mode_tol")?,
            moments: r.list("particles.moments")?,
        };
        if particles.count == 0 {
            return Err(bad("particles.count", "need at least one tracer"));
        }

        let t_average = r.positive("t_average")?;
        let t_burn = match r.raw("t_burn") {
            "" => t_average / 4.0,
            _ => r.positive("t_burn")?,
        };
        let diag_interval = r.positive("diag_interval")?;
        let checkpoint_interval = r.positive("checkpoint_interval")?;
        let ensemble_size = r.usize("ensemble_size")?;
        if ensemble_size == 0 {
            return Err(bad("ensemble_size", "must be at least 1"));
        }
        let smooth_cutoff = match r.raw("diag.cutoff") {
            "sharp" => false,
            "smooth" => true,
            s => return Err(bad("diag.cutoff", format!("'{s}' is neither sharp nor smooth"))),
        };
        let yaglom_ell = r.list("diag.yaglom_ell")?;
        if yaglom_ell.iter().any(|&l| !(l > 0.0 && l < std::f64::consts::PI)) {
            return Err(bad("diag.yaglom_ell", "increments must lie in (0, pi)"));
        }
        let mix = MixConfig {
            t_spinup: r.f64("mix.t_spinup")?.max(0.0),
            t_mix: r.positive("mix.t_mix")?,
            sample_interval: r.positive("mix.sample_interval")?,
            fit_floor: r.positive("mix.fit_floor")?,
            fit_ceiling: r.positive("mix.fit_ceiling")?,
            control_n: r.usize("mix.control_n")?,
            control_dt: r.positive("mix.control_dt")?,
            control_t_max: r.positive("mix.control_t_max")?,
        };
        if mix.fit_floor >= mix.fit_ceiling {
            return Err(bad("mix.fit_floor", "must be below mix.fit_ceiling"));
        }
        let cfg = RunConfig {
            grid,
            model,
            dt,
            forcing,
            source,
            seed,
            kappas,
            source_on: r.bool("scalar.source_on")?,
            g0,
            particles,
            t_burn,
            t_average,
            diag_interval,
            checkpoint_interval,
            ensemble_size,
            output_dir: PathBuf::from(r.raw("output_dir")),
            flux_n: r.list("diag.flux_N")?,
            smooth_cutoff,
            yaglom_ell,
            yaglom_angles: r.usize("diag.yaglom_angles")?,
            mix,
            lyap_t_spinup: r.f64("lyap.t_spinup")?.max(0.0),
            lyap_t_run: r.positive("lyap.t_run")?,
            warnings,
            values,
        };
        Ok(cfg)
    }

    /// Effective value of every schema key, one `key = value` per line.
    pub fn canonical(&self) -> String {
        let r = Reader(&self.values);
        let mut out = String::new();
        for (k, _, _) in SCHEMA {
            // the output location does not change any result
            if *k == "output_dir" {
                continue;
            }
            writeln!(out, "{k} = {}", r.raw(k)).unwrap();
        }
        out
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn value(&self, key: &str) -> &str {
        Reader(&self.values).raw(key)
    }

    /// Steps per `interval`, at least one.
    pub fn steps_for(&self, interval: f64) -> u64 {
        ((interval / self.dt).round() as u64).max(1)
    }
}

/// Schema as a commented config file.
pub fn schema_text() -> String {
    let mut out = String::new();
    for (k, d, doc) in SCHEMA {
        writeln!(out, "# {doc}\n{k} = {d}").unwrap();
    }
    out
}
