//! Field statistics: radial spectra, the L² balance, scale-by-scale flux,
//! structure-function flux and Besov-multiplier norms.

use crate::spectral::{
    derivative, sharp_projection, smooth_projection, zeta, Band, Complex64, Grid, SmoothKind, SpectralField, Transform,
};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("source intensity chi must be positive")]
    ZeroChi,
    #[error("kappa must be positive")]
    Kappa,
    #[error("unsuitable multiplier: {0}")]
    Multiplier(String),
    #[error("invalid argument: {0}")]
    Argument(&'static str),
}

pub type Result<T> = std::result::Result<T, DiagnosticsError>;

/// `‖Π_{≤N} g‖²` for every integer radius `N = 0..=N_max`, where `N_max`
/// covers the largest wavevector on the grid.
pub fn radial_cumulative(g: &SpectralField) -> Vec<f64> {
    let grid = g.grid();
    let top = (grid.dim() as f64).sqrt() * (grid.n() / 2) as f64;
    let nmax = top.ceil() as usize;
    let mut bins = vec![0.0; nmax + 1];
    let vol = grid.volume();
    for s in 0..grid.spectral_len() {
        let r = grid.k_squared(s).sqrt();
        // smallest integer radius with |k| ≤ N, robust to round-off in sqrt
        let mut b = r.ceil() as usize;
        if b > 0 && (b - 1) as f64 * (b - 1) as f64 >= grid.k_squared(s) * (1.0 - 1e-12) {
            b -= 1;
        }
        let w = grid.weight(s);
        let e: f64 = g.components().iter().map(|c| c[s].norm_sqr()).sum();
        bins[b.min(nmax)] += w * e * vol;
    }
    let mut acc = 0.0;
    for v in bins.iter_mut() {
        acc += *v;
        *v = acc;
    }
    bins
}

/// Dyadic levels `1, 2, 4, …` up to the first one covering every grid mode.
pub fn dyadic_levels(grid: &Grid) -> Vec<f64> {
    let top = (grid.dim() as f64).sqrt() * (grid.n() / 2) as f64;
    let mut out = vec![1.0];
    while *out.last().unwrap() < top {
        out.push(out.last().unwrap() * 2.0);
    }
    out
}

/// Cumulative and shell energies on dyadic levels.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSeries {
    pub t: f64,
    pub levels: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub shell: Vec<f64>,
}

impl SpectrumSeries {
    /// Builds the dyadic series from a radial cumulative table.
    pub fn from_radial(t: f64, radial: &[f64], levels: &[f64]) -> Self {
        let at = |n: f64| radial[(n as usize).min(radial.len() - 1)];
        let cumulative: Vec<f64> = levels.iter().map(|&n| at(n)).collect();
        let shell =
            cumulative.iter().enumerate().map(|(j, &c)| if j == 0 { c } else { c - cumulative[j - 1] }).collect();
        SpectrumSeries { t, levels: levels.to_vec(), cumulative, shell }
    }
}

/// Dyadic cumulative spectrum of `g` on `n_levels` levels `1, 2, …, 2^{L−1}`.
pub fn cumulative_spectrum(g: &SpectralField, n_levels: usize, t: f64) -> SpectrumSeries {
    let levels: Vec<f64> = (0..n_levels).map(|j| (1u64 << j) as f64).collect();
    SpectrumSeries::from_radial(t, &radial_cumulative(g), &levels)
}

/// `2κ‖∇g‖² / χ`.
pub fn l2_balance(g: &SpectralField, kappa: f64, chi: f64) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(DiagnosticsError::ZeroChi);
    }
    if !(kappa > 0.0) {
        return Err(DiagnosticsError::Kappa);
    }
    let grid = g.grid().clone();
    Ok(2.0 * kappa * g.weighted_energy(|s| grid.k_squared(s)) / chi)
}

/// Dealiased `u·∇g` from real-space velocity components.
pub fn advection(u_real: &[Vec<f64>], g: &SpectralField, tr: &mut Transform) -> SpectralField {
    let grid = g.grid().clone();
    let mut acc = vec![0.0; grid.real_len()];
    for (j, uj) in u_real.iter().enumerate().take(grid.dim()) {
        let mut order = [0u32; 3];
        order[j] = 1;
        let dg = derivative(g, &order[..grid.dim()]);
        let mut r = vec![0.0; grid.real_len()];
        tr.backward(dg.comp(0), &mut r).expect("matching grid");
        for ((a, u), d) in acc.iter_mut().zip(uj).zip(&r) {
            *a += u * d;
        }
    }
    let mut out = SpectralField::scalar(&grid);
    tr.forward_dealiased(&acc, out.comp_mut(0)).expect("matching grid");
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cutoff {
    /// `1_{|k| ≤ N}`
    Sharp,
    /// `ζ(|k|/N)`
    Smooth,
}

fn project(f: &SpectralField, n: f64, cutoff: Cutoff) -> SpectralField {
    match cutoff {
        Cutoff::Sharp => sharp_projection(f, n, Band::AtMost),
        Cutoff::Smooth => smooth_projection(f, n, SmoothKind::Low),
    }
}

/// `⟨Π g, Π(u·∇g)⟩` given the advection term. With this sign the stationary
/// budget reads `flux + κ‖∇Π g‖² = ½‖Π b‖²`.
pub fn flux_from_advection(g: &SpectralField, adv: &SpectralField, n: f64, cutoff: Cutoff) -> f64 {
    project(g, n, cutoff).inner(&project(adv, n, cutoff))
}

/// `⟨Π_{≤N} g, Π_{≤N}(u·∇g)⟩` for a spectral velocity `u`.
pub fn spectral_flux(u: &SpectralField, g: &SpectralField, n: f64, cutoff: Cutoff) -> f64 {
    let mut tr = Transform::new(g.grid());
    let ur = tr.backward_field(u);
    let adv = advection(&ur, g, &mut tr);
    flux_from_advection(g, &adv, n, cutoff)
}

/// Terms of the scale-by-scale budget at one cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxBudget {
    pub n: f64,
    pub flux: f64,
    pub kappa_grad: f64,
    pub half_b: f64,
}

pub fn flux_budget(
    g: &SpectralField,
    adv: &SpectralField,
    b: &SpectralField,
    kappa: f64,
    n: f64,
    cutoff: Cutoff,
) -> FluxBudget {
    let pg = project(g, n, cutoff);
    let grid = g.grid().clone();
    FluxBudget {
        n,
        flux: pg.inner(&project(adv, n, cutoff)),
        kappa_grad: kappa * pg.weighted_energy(|s| grid.k_squared(s)),
        half_b: 0.5 * project(b, n, cutoff).norm_l2_squared(),
    }
}

/// `flux` and `κ‖∇Π g‖²` at every cutoff in one pass over the modes, plus
/// the uncut `κ‖∇g‖²`. Agrees with [`flux_budget`] term by term.
pub fn budget_terms(
    g: &SpectralField,
    adv: &SpectralField,
    kappa: f64,
    cutoffs: &[f64],
    cutoff: Cutoff,
) -> (Vec<(f64, f64)>, f64) {
    let grid = g.grid();
    let (gc, ac) = (g.comp(0), adv.comp(0));
    let mut terms = vec![(0.0, 0.0); cutoffs.len()];
    let mut total = 0.0;
    for s in 0..grid.spectral_len() {
        let m2 = gc[s].norm_sqr();
        if m2 == 0.0 {
            continue;
        }
        let w = grid.weight(s);
        let k2 = grid.k_squared(s);
        let cross = w * (gc[s] * ac[s].conj()).re;
        let grad = w * k2 * m2;
        total += grad;
        for (t, &n) in terms.iter_mut().zip(cutoffs) {
            let p = match cutoff {
                Cutoff::Sharp => (k2 <= n * n * (1.0 + 1e-12)) as u8 as f64,
                Cutoff::Smooth => zeta(k2.sqrt() / n),
            };
            if p != 0.0 {
                t.0 += p * p * cross;
                t.1 += p * p * grad;
            }
        }
    }
    let v = grid.volume();
    let terms = terms.into_iter().map(|(f, k)| (f * v, kappa * k * v)).collect();
    (terms, kappa * total * v)
}

/// Structure-function flux kernel for one `(u, g)` pair.
///
/// With `⟨·⟩` the volume average and `δ_h f = f(x+h) − f(x)`,
/// `⟨|δ_h g|² δ_h u_j⟩ = ⟨g² (u_j(x+h) − u_j(x−h))⟩ + 2⟨g u_j (g(x+h) − g(x−h))⟩`,
/// which in Fourier space is `Σ_k a_j(k) 2i sin(k·h)` for a fixed table `a_j`.
pub struct YaglomKernel {
    grid: Grid,
    coef: Vec<Vec<Complex64>>,
}

impl YaglomKernel {
    pub fn new(u: &SpectralField, g: &SpectralField) -> Self {
        let grid = g.grid().clone();
        let d = grid.dim();
        let mut tr = Transform::new(&grid);
        let ur = tr.backward_field(u);
        let gr = tr.backward_field(g).remove(0);
        let len = grid.spectral_len();
        let mut g2 = vec![Complex64::new(0.0, 0.0); len];
        let sq: Vec<f64> = gr.iter().map(|v| v * v).collect();
        tr.forward_dealiased(&sq, &mut g2).expect("matching grid");
        let gh = g.comp(0);
        let mut coef = Vec::with_capacity(d);
        let mut gu = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..d {
            let prod: Vec<f64> = gr.iter().zip(&ur[j]).map(|(a, b)| a * b).collect();
            tr.forward_dealiased(&prod, &mut gu).expect("matching grid");
            let uh = u.comp(j);
            let c: Vec<Complex64> = (0..len)
                .map(|s| {
                    let w = grid.weight(s);
                    (g2[s].conj() * uh[s] + 2.0 * gu[s].conj() * gh[s]) * w
                })
                .collect();
            coef.push(c);
        }
        YaglomKernel { grid, coef }
    }

    /// `⟨|δ_h g|² δ_h u·n⟩` for the increment `h = ℓ n`.
    pub fn increment_moment(&self, ell: f64, dir: [f64; 3]) -> f64 {
        let grid = &self.grid;
        let h = [ell * dir[0], ell * dir[1], ell * dir[2]];
        let n = grid.n() as i64;
        // separable phase tables e^{i k_j h_j} over the stored wavenumbers
        let tables: Vec<Vec<Complex64>> = h
            .iter()
            .map(|&hj| {
                (0..n)
                    .map(|i| {
                        let k = if i > n / 2 { i - n } else { i };
                        Complex64::from_polar(1.0, k as f64 * hj)
                    })
                    .collect()
            })
            .collect();
        let idx = |k: i32| -> usize {
            if k < 0 {
                (k as i64 + n) as usize
            } else {
                k as usize
            }
        };
        let mut total = 0.0;
        for s in 0..grid.spectral_len() {
            let k = grid.wave(s);
            let mut ph = tables[0][idx(k[0])] * tables[1][idx(k[1])];
            if grid.dim() == 3 {
                ph *= tables[2][idx(k[2])];
            }
            // a · 2i sin(k·h), real part of the full-spectrum sum
            let sin = ph.im;
            let mut acc = 0.0;
            for (j, c) in self.coef.iter().enumerate() {
                acc += dir[j] * (-2.0 * c[s].im * sin);
            }
            total += acc;
        }
        total
    }

    /// `(1/ℓ)` times the direction average of [`Self::increment_moment`].
    pub fn flux(&self, ell: f64, n_angles: usize) -> Result<f64> {
        if !(ell > 0.0 && ell < PI) {
            return Err(DiagnosticsError::Argument("ell must lie in (0, pi)"));
        }
        if n_angles < 8 {
            return Err(DiagnosticsError::Argument("at least 8 directions are required"));
        }
        let dirs = directions(self.grid.dim(), n_angles);
        let s: f64 = dirs.iter().map(|&d| self.increment_moment(ell, d)).sum();
        Ok(s / (dirs.len() as f64 * ell))
    }
}

/// Uniform angles on the circle, or a Fibonacci lattice on the sphere.
pub fn directions(dim: usize, count: usize) -> Vec<[f64; 3]> {
    if dim == 2 {
        (0..count)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / count as f64;
                [th.cos(), th.sin(), 0.0]
            })
            .collect()
    } else {
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..count)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let th = golden * i as f64;
                [r * th.cos(), r * th.sin(), z]
            })
            .collect()
    }
}

pub fn yaglom_flux(u: &SpectralField, g: &SpectralField, ell: f64, n_angles: usize) -> Result<f64> {
    YaglomKernel::new(u, g).flux(ell, n_angles)
}

/// Stationary value of [`yaglom_flux`]: `−(2/d) χ / |T^d|`, the volume
/// average matching the averaged increments.
pub fn yaglom_target(grid: &Grid, chi: f64) -> f64 {
    -2.0 / grid.dim() as f64 * chi / grid.volume()
}

/// Multiplier tabulated on integer wavenumbers `0..=k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct BesovMultiplier {
    values: Vec<f64>,
}

impl BesovMultiplier {
    pub fn from_fn(k_max: usize, f: impl Fn(f64) -> f64) -> Self {
        BesovMultiplier { values: (0..=k_max).map(|k| f(k as f64)).collect() }
    }

    pub fn from_table(values: Vec<f64>) -> Self {
        BesovMultiplier { values }
    }

    /// `log(e + k)`.
    pub fn log_default(k_max: usize) -> Self {
        Self::from_fn(k_max, |k| (std::f64::consts::E + k).ln())
    }

    pub fn k_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k.min(self.k_max())]
    }

    /// Checks monotonicity, `M(0) ≥ 1`, growth across the table and the
    /// Lipschitz comparison `|M(k) − M(l)| ≤ c M(l) |k − l| / √(1 + k²)` on
    /// all pairs with `l/2 ≤ k ≤ 2l`.
    pub fn check(&self, c: f64) -> Result<()> {
        let v = &self.values;
        if v.len() < 2 {
            return Err(DiagnosticsError::Multiplier("table needs at least two entries".into()));
        }
        if v[0] < 1.0 {
            return Err(DiagnosticsError::Multiplier(format!("M(0) = {} is below 1", v[0])));
        }
        if let Some(k) = (1..v.len()).find(|&k| v[k] < v[k - 1]) {
            return Err(DiagnosticsError::Multiplier(format!("not monotone at k = {k}")));
        }
        if v[v.len() - 1] <= v[0] {
            return Err(DiagnosticsError::Multiplier("does not grow over the table".into()));
        }
        for l in 1..v.len() {
            let lo = l.div_ceil(2);
            let hi = (2 * l).min(v.len() - 1);
            for k in lo..=hi {
                let lhs = (v[k] - v[l]).abs();
                let rhs = c * v[l] * (k as f64 - l as f64).abs() / (1.0 + (k * k) as f64).sqrt();
                if lhs > rhs * (1.0 + 1e-12) {
                    return Err(DiagnosticsError::Multiplier(format!(
                        "Lipschitz comparison fails at (k, l) = ({k}, {l})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `sup_N M(N) ‖Π_N g‖` over the dyadic shells present on the grid.
pub fn besov_norm(g: &SpectralField, m: &BesovMultiplier) -> Result<f64> {
    m.check(2.0)?;
    let levels = dyadic_levels(g.grid());
    let series = SpectrumSeries::from_radial(0.0, &radial_cumulative(g), &levels);
    Ok(besov_from_shells(&series.levels, &series.shell, m))
}

/// Same supremum from shell energies `‖Π_N g‖²` (e.g. time averages).
pub fn besov_from_shells(levels: &[f64], shell: &[f64], m: &BesovMultiplier) -> f64 {
    levels.iter().zip(shell).map(|(&n, &e)| m.at(n as usize) * e.max(0.0).sqrt()).fold(0.0, f64::max)
}
