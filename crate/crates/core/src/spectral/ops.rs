use super::{Complex64, Rank, SpectralField};

/// Radial band for the sharp projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    /// `|k| ≤ N`
    AtMost,
    /// `N/2 < |k| ≤ N`, with the `N = 1` shell equal to `|k| ≤ 1`
    Shell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothKind {
    /// multiplier `ζ(|k|/N)`
    Low,
    /// multiplier `ψ(|k|/N) = ζ(|k|/2N) − ζ(|k|/N)`
    Band,
}

/// Spectral derivative `∂^α f`, one order per axis.
///
/// Odd derivatives along an axis drop that axis's Nyquist modes, whose
/// derivative has no real representative on the grid.
pub fn derivative(f: &SpectralField, multi: &[u32]) -> SpectralField {
    let g = f.grid().clone();
    let half = (g.n() / 2) as i32;
    let mut out = f.clone();
    let len = g.spectral_len();
    for s in 0..len {
        let k = g.wave(s);
        let mut m = Complex64::new(1.0, 0.0);
        for (j, &order) in multi.iter().enumerate().take(g.dim()) {
            if order == 0 {
                continue;
            }
            if order % 2 == 1 && k[j].abs() == half {
                m = Complex64::new(0.0, 0.0);
            }
            m *= Complex64::new(0.0, k[j] as f64).powu(order);
        }
        for c in out.components_mut() {
            c[s] *= m;
        }
    }
    out
}

fn single_axis(dim: usize, j: usize) -> Vec<u32> {
    let mut m = vec![0; dim];
    m[j] = 1;
    m
}

pub fn gradient(f: &SpectralField) -> SpectralField {
    let g = f.grid();
    let mut out = SpectralField::vector(g);
    for j in 0..g.dim() {
        let d = derivative(f, &single_axis(g.dim(), j));
        out.comp_mut(j).copy_from_slice(d.comp(0));
    }
    out
}

pub fn divergence(v: &SpectralField) -> SpectralField {
    let g = v.grid().clone();
    let mut out = SpectralField::scalar(&g);
    let half = (g.n() / 2) as i32;
    for s in 0..g.spectral_len() {
        let k = g.wave(s);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..g.dim() {
            if k[j].abs() != half {
                acc += v.comp(j)[s] * Complex64::new(0.0, k[j] as f64);
            }
        }
        out.comp_mut(0)[s] = acc;
    }
    out
}

/// Scalar vorticity `∂₁u₂ − ∂₂u₁` of a planar vector field.
pub fn curl2d(v: &SpectralField) -> SpectralField {
    let g = v.grid().clone();
    let mut out = SpectralField::scalar(&g);
    let half = (g.n() / 2) as i32;
    for s in 0..g.spectral_len() {
        let k = g.wave(s);
        let d1 = if k[0].abs() == half { 0.0 } else { k[0] as f64 };
        let d2 = if k[1].abs() == half { 0.0 } else { k[1] as f64 };
        out.comp_mut(0)[s] = Complex64::new(0.0, d1) * v.comp(1)[s] - Complex64::new(0.0, d2) * v.comp(0)[s];
    }
    out
}

/// 2/3-rule truncation: zero every mode with `|k|_∞ > ⌊n/3⌋`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(f: &mut SpectralField) {
    let g = f.grid().clone();
    f.apply_symbol(|s| if g.is_dealiased(s) { 1.0 } else { 0.0 });
}

/// Removes the gradient part: `v̂ − k (k·v̂)/|k|²`. The mean is kept.
pub fn project_leray(v: &SpectralField) -> SpectralField {
    let mut out = v.clone();
    project_leray_in_place(&mut out);
    out
}

pub fn project_leray_in_place(v: &mut SpectralField) {
    assert_eq!(v.rank(), Rank::Vector, "Leray projection acts on vector fields");
    let g = v.grid().clone();
    let d = g.dim();
    for s in 1..g.spectral_len() {
        let k = g.wave(s);
        let k2 = g.k_squared(s);
        let mut dot = Complex64::new(0.0, 0.0);
        for j in 0..d {
            dot += v.comp(j)[s] * k[j] as f64;
        }
        let dot = dot / k2;
        for j in 0..d {
            v.comp_mut(j)[s] -= dot * k[j] as f64;
        }
    }
}

fn within(k2: f64, radius: f64) -> bool {
    k2 <= radius * radius * (1.0 + 1e-12)
}

/// Sharp radial projection (`Π_{≤N}` or the dyadic shell `Π_N`).
pub fn sharp_projection(f: &SpectralField, n_cut: f64, band: Band) -> SpectralField {
    let g = f.grid().clone();
    let mut out = f.clone();
    match band {
        Band::AtMost => out.apply_symbol(|s| within(g.k_squared(s), n_cut) as u8 as f64),
        Band::Shell if n_cut <= 1.0 => out.apply_symbol(|s| within(g.k_squared(s), n_cut) as u8 as f64),
        Band::Shell => out.apply_symbol(|s| {
            let k2 = g.k_squared(s);
            (within(k2, n_cut) && !within(k2, n_cut / 2.0)) as u8 as f64
        }),
    }
    out
}

/// Keeps `|k|_∞ ≤ N` (the cube used by the Galerkin models).
pub fn galerkin_projection(f: &SpectralField, n_cut: usize) -> SpectralField {
    let g = f.grid().clone();
    let mut out = f.clone();
    out.apply_symbol(|s| (g.sup_norm(s) as usize <= n_cut) as u8 as f64);
    out
}

/// Quintic smootherstep `6t⁵ − 15t⁴ + 10t³` on `[0, 1]`.
fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Low-pass bump: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 3/2`, `C²` in between.
pub fn zeta(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 1.5 {
        0.0
    } else {
        1.0 - smootherstep((a - 1.0) / 0.5)
    }
}

/// Band bump `ζ(ξ/2) − ζ(ξ)`, supported in `1 < |ξ| < 3`.
pub fn psi(xi: f64) -> f64 {
    zeta(xi / 2.0) - zeta(xi)
}

pub fn smooth_projection(f: &SpectralField, n_cut: f64, kind: SmoothKind) -> SpectralField {
    let g = f.grid().clone();
    let mut out = f.clone();
    match kind {
        SmoothKind::Low => out.apply_symbol(|s| zeta(g.k_squared(s).sqrt() / n_cut)),
        SmoothKind::Band => out.apply_symbol(|s| psi(g.k_squared(s).sqrt() / n_cut)),
    }
    out
}

/// `(Σ_k (1+|k|²)^s |f̂(k)|²)^{1/2}`, with the torus volume folded in so that
/// `s = 0` is the `L²` norm.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let g = f.grid().clone();
    f.weighted_energy(|i| (1.0 + g.k_squared(i)).powf(s)).sqrt()
}

/// `x ↦ f(x + h)` by exact phase shift.
pub fn translate(f: &SpectralField, h: [f64; 3]) -> SpectralField {
    let g = f.grid().clone();
    let mut out = f.clone();
    for s in 0..g.spectral_len() {
        let k = g.wave(s);
        let phase = k[0] as f64 * h[0] + k[1] as f64 * h[1] + k[2] as f64 * h[2];
        let rot = Complex64::from_polar(1.0, phase);
        for c in out.components_mut() {
            c[s] *= rot;
        }
    }
    out
}
