use std::f64::consts::PI;

use super::{Complex64, Grid, SpectralError, SpectralField};

/// Index `m = (k, i)` of the real divergence-free basis. `pol` is zero-based,
/// so it ranges over `0..d-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisMode {
    pub k: [i64; 3],
    pub pol: usize,
}

/// Normalization `√2/(2π)^{d/2}` giving unit `L²` norm.
pub fn c_d(dim: usize) -> f64 {
    2f64.sqrt() / (2.0 * PI).powf(dim as f64 / 2.0)
}

/// Membership in the "positive" half of the lattice, which selects the sine
/// branch. Decided by the last component, then the first, then (in 3D, for
/// wavevectors along the second axis) the second.
pub fn is_positive(k: [i64; 3], dim: usize) -> bool {
    let last = k[dim - 1];
    if last != 0 {
        return last > 0;
    }
    if k[0] != 0 {
        return k[0] > 0;
    }
    dim == 3 && k[1] > 0
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

/// Unit polarization vector `γ_k^i ⟂ k`, odd in `k`.
///
/// In 2D this is `k^⊥/|k|` with `k^⊥ = (k₂, −k₁)`. In 3D the pair is
/// `normalize(k × a)` and `k̂ × γ¹`, where `a` is the coordinate axis along
/// which `|k_j|` is smallest; negative wavevectors take the negated vectors.
pub fn gamma(k: [i64; 3], pol: usize, dim: usize) -> [f64; 3] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    if dim == 2 {
        return normalized([kf[1], -kf[0], 0.0]);
    }
    if !is_positive(k, dim) {
        let g = gamma([-k[0], -k[1], -k[2]], pol, dim);
        return [-g[0], -g[1], -g[2]];
    }
    let mut axis = 0;
    for j in 1..3 {
        if kf[j].abs() < kf[axis].abs() {
            axis = j;
        }
    }
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let g1 = normalized(cross(kf, a));
    if pol == 0 {
        g1
    } else {
        normalized(cross(normalized(kf), g1))
    }
}

impl BasisMode {
    pub fn new(k: [i64; 3], pol: usize) -> Self {
        BasisMode { k, pol }
    }

    pub fn validate(&self, dim: usize) -> Result<(), SpectralError> {
        if self.k == [0, 0, 0] {
            return Err(SpectralError::ZeroWavevector);
        }
        if self.pol + 1 >= dim {
            return Err(SpectralError::Polarization { i: self.pol, dim });
        }
        if dim == 2 && self.k[2] != 0 {
            return Err(SpectralError::OffGrid(self.k));
        }
        Ok(())
    }

    pub fn norm_k(&self) -> f64 {
        ((self.k[0] * self.k[0] + self.k[1] * self.k[1] + self.k[2] * self.k[2]) as f64).sqrt()
    }

    /// Fourier coefficient vector of `e_m` at `+k` (the one at `−k` is its conjugate).
    pub fn fourier(&self, dim: usize) -> [Complex64; 3] {
        let g = gamma(self.k, self.pol, dim);
        let c = c_d(dim) / 2.0;
        let unit = if is_positive(self.k, dim) { Complex64::new(0.0, -c) } else { Complex64::new(c, 0.0) };
        [unit * g[0], unit * g[1], unit * g[2]]
    }

    /// `field += amp · e_m`.
    pub fn add_to(&self, field: &mut SpectralField, amp: f64) -> Result<(), SpectralError> {
        let dim = field.grid().dim();
        let v = self.fourier(dim);
        for (j, vj) in v.iter().enumerate().take(dim) {
            if *vj != Complex64::new(0.0, 0.0) {
                field.add_mode(j, self.k, vj * amp)?;
            }
        }
        Ok(())
    }

    /// `⟨u, e_m⟩_{L²}`.
    pub fn coefficient(&self, u: &SpectralField) -> f64 {
        let g = u.grid();
        let dim = g.dim();
        let v = self.fourier(dim);
        let mut acc = 0.0;
        for (j, vj) in v.iter().enumerate().take(dim) {
            acc += (u.coeff(j, self.k) * vj.conj()).re;
        }
        2.0 * acc * g.volume()
    }
}

/// The basis vector field `e_m` on a grid.
pub fn basis_mode(m: BasisMode, grid: &Grid) -> Result<SpectralField, SpectralError> {
    m.validate(grid.dim())?;
    let mut f = SpectralField::vector(grid);
    m.add_to(&mut f, 1.0)?;
    Ok(f)
}
