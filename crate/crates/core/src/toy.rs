//! Pure-strain toy model of the Batchelor spectrum.
//!
//! A single Fourier mode of the scalar is carried by the linear strain
//! `diag(γ, -γ)`; its frequency stretches exponentially while diffusion damps
//! the amplitude. Everything here is closed form except the cumulative mass,
//! which is integrated with an adaptive 7/15-point Gauss-Kronrod rule.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ToyError {
    #[error("invalid toy parameter: {0}")]
    Parameter(&'static str),
    #[error("frequency {n} is below the monotone threshold {threshold}")]
    BelowThreshold { n: f64, threshold: f64 },
    #[error("quadrature did not converge: estimate {estimate}, error {error} after {intervals} intervals")]
    Quadrature { estimate: f64, error: f64, intervals: usize },
}

pub type Result<T> = std::result::Result<T, ToyError>;

/// Strain rate, diffusivity, source intensity and initial frequency.
///
/// The first component of `xi0` must have unit modulus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrainModel {
    pub gamma: f64,
    pub kappa: f64,
    pub chi: f64,
    pub xi0: [f64; 2],
}

impl StrainModel {
    pub fn new(gamma: f64, kappa: f64, chi: f64, xi0: [f64; 2]) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ToyError::Parameter("gamma must be positive"));
        }
        // kappa = 0 is allowed for the amplitude; the spectrum needs kappa > 0
        // only for its dissipative tail.
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(ToyError::Parameter("kappa must be non-negative"));
        }
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(ToyError::Parameter("chi must be positive"));
        }
        if ((xi0[0].abs()) - 1.0).abs() > 1e-12 || !xi0[1].is_finite() {
            return Err(ToyError::Parameter("xi0 must have unit first component"));
        }
        Ok(StrainModel { gamma, kappa, chi, xi0 })
    }

    /// Default initial frequency `(1, 1)`.
    pub fn with_defaults(gamma: f64, kappa: f64, chi: f64) -> Result<Self> {
        Self::new(gamma, kappa, chi, [1.0, 1.0])
    }

    fn a(&self) -> f64 {
        self.xi0[0] * self.xi0[0]
    }

    fn b(&self) -> f64 {
        self.xi0[1] * self.xi0[1]
    }

    /// Smallest frequency for which `t(n)` is defined: `|xi0|`.
    pub fn threshold(&self) -> f64 {
        (self.a() + self.b()).sqrt()
    }

    /// Time after which `|xi_t|` is increasing.
    fn t_turn(&self) -> f64 {
        // d|xi|^2/dX >= 0 iff X >= sqrt(b/a), X = e^{2 gamma t}
        let x = (self.b() / self.a()).sqrt();
        if x > 1.0 {
            x.ln() / (2.0 * self.gamma)
        } else {
            0.0
        }
    }
}

pub fn frequency_trajectory(m: &StrainModel, t: f64) -> [f64; 2] {
    let e = (m.gamma * t).exp();
    [e * m.xi0[0], m.xi0[1] / e]
}

fn freq_norm(m: &StrainModel, t: f64) -> f64 {
    let x = frequency_trajectory(m, t);
    x[0].hypot(x[1])
}

/// Solves `|xi_t| = n` on the increasing branch by bisection.
pub fn freq_inverse(m: &StrainModel, n: f64) -> Result<f64> {
    let th = m.threshold();
    if !(n >= th) {
        return Err(ToyError::BelowThreshold { n, threshold: th });
    }
    let mut lo = m.t_turn();
    let mut hi = lo.max(1.0 / m.gamma);
    while freq_norm(m, hi) < n {
        lo = hi;
        hi *= 2.0;
    }
    if freq_norm(m, lo) >= n {
        return Ok(lo);
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if freq_norm(m, mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `dt/dn` on the increasing branch, from `d|xi|/dt = gamma (a X - b/X) / n`.
pub fn t_prime(m: &StrainModel, n: f64) -> Result<f64> {
    let t = freq_inverse(m, n)?;
    let x = (2.0 * m.gamma * t).exp();
    let rate = m.gamma * (m.a() * x - m.b() / x);
    Ok(n / rate)
}

/// Diffusive damping `C_t` of the mode launched at `xi0`.
pub fn amplitude(m: &StrainModel, t: f64) -> f64 {
    let g2 = 2.0 * m.gamma;
    let int = (m.a() * (g2 * t).exp_m1() - m.b() * (-g2 * t).exp_m1()) / g2;
    (-m.kappa * int).exp()
}

/// `Gamma(n) = t'(n) chi C_{t(n)}^2`.
pub fn power_spectral_density(m: &StrainModel, n: f64) -> Result<f64> {
    let t = freq_inverse(m, n)?;
    let c = amplitude(m, t);
    Ok(t_prime(m, n)? * m.chi * c * c)
}

/// `chi * int_0^{t(n)} C_s^2 ds`.
pub fn cumulative_mass(m: &StrainModel, n: f64) -> Result<f64> {
    let t = freq_inverse(m, n)?;
    mass_on(m, 0.0, t)
}

/// Mass carried between two frequencies, integrated directly so that
/// finite differences of the cumulative do not cancel.
pub fn cumulative_mass_between(m: &StrainModel, n0: f64, n1: f64) -> Result<f64> {
    let t0 = freq_inverse(m, n0)?;
    let t1 = freq_inverse(m, n1)?;
    mass_on(m, t0, t1)
}

fn mass_on(m: &StrainModel, t0: f64, t1: f64) -> Result<f64> {
    let f = |s: f64| {
        let c = amplitude(m, s);
        c * c
    };
    Ok(m.chi * integrate(f, t0, t1, 1e-9, 0.0)?)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature: bisects the interval with the
/// largest error estimate until the total error meets `max(abs, rel |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64, abs: f64) -> Result<f64> {
    const LIMIT: usize = 4000;
    if a == b {
        return Ok(0.0);
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(ToyError::Quadrature { estimate: total, error: err, intervals: parts.len() });
        }
        if err <= abs.max(rel * total.abs()) {
            return Ok(sign * total);
        }
        if parts.len() >= LIMIT {
            return Err(ToyError::Quadrature { estimate: total, error: err, intervals: parts.len() });
        }
        let worst = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).map(|(i, _)| i).unwrap_or(0);
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// One row of the toy spectrum table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyRow {
    pub n: f64,
    pub gamma_n: f64,
    pub cumulative: f64,
    pub reference: f64,
}

/// `Gamma`, cumulative mass and the `chi/(gamma n)` reference on each `n`.
pub fn spectrum_table(m: &StrainModel, ns: &[f64]) -> Result<Vec<ToyRow>> {
    ns.iter()
        .map(|&n| {
            Ok(ToyRow {
                n,
                gamma_n: power_spectral_density(m, n)?,
                cumulative: cumulative_mass(m, n)?,
                reference: m.chi / (m.gamma * n),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials() {
        let v = integrate(|x| x.powi(20), 0.0, 1.0, 1e-14, 0.0).unwrap();
        assert!((v - 1.0 / 21.0).abs() < 1e-15);
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.exp(), 1.0, 0.0, 1e-12, 0.0).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn decoupled_inverse_is_logarithmic() {
        let m = StrainModel::new(0.7, 1e-6, 1.0, [1.0, 0.0]).unwrap();
        for n in [1.0, 3.0, 50.0, 1e4] {
            let t = freq_inverse(&m, n).unwrap();
            assert!((t - n.ln() / 0.7).abs() < 1e-10, "{n}");
        }
    }

    #[test]
    fn below_threshold_is_rejected() {
        let m = StrainModel::with_defaults(1.0, 1e-8, 1.0).unwrap();
        assert!(matches!(freq_inverse(&m, 1.2), Err(ToyError::BelowThreshold { .. })));
    }

    #[test]
    fn bad_initial_frequency() {
        assert!(StrainModel::new(1.0, 1e-8, 1.0, [0.5, 1.0]).is_err());
        assert!(StrainModel::new(0.0, 1e-8, 1.0, [1.0, 1.0]).is_err());
    }
}
