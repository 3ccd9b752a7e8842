use super::{Complex64, Grid, SpectralError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
}

/// Fourier coefficients of a real field on the torus, one half-spectrum array
/// per component.
///
/// Entries on the planes `k₁ = 0` and `k₁ = n/2` are stored for both `k` and
/// `−k`; the setters keep those pairs conjugate so the field stays real.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid, rank: Rank) -> Self {
        let count = match rank {
            Rank::Scalar => 1,
            Rank::Vector => grid.dim(),
        };
        SpectralField { grid: grid.clone(), comps: vec![vec![Complex64::new(0.0, 0.0); grid.spectral_len()]; count] }
    }

    pub fn scalar(grid: &Grid) -> Self {
        Self::zeros(grid, Rank::Scalar)
    }

    pub fn vector(grid: &Grid) -> Self {
        Self::zeros(grid, Rank::Vector)
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<Complex64>>) -> Result<Self, SpectralError> {
        if comps.len() != 1 && comps.len() != grid.dim() {
            return Err(SpectralError::Snapshot(format!(
                "{} components on a {}-dimensional grid",
                comps.len(),
                grid.dim()
            )));
        }
        for c in &comps {
            if c.len() != grid.spectral_len() {
                return Err(SpectralError::Length { expected: grid.spectral_len(), got: c.len() });
            }
        }
        Ok(SpectralField { grid: grid.clone(), comps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        if self.comps.len() == 1 {
            Rank::Scalar
        } else {
            Rank::Vector
        }
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Coefficient at a full-spectrum wavevector; zero when `k` is off the grid.
    pub fn coeff(&self, c: usize, k: [i64; 3]) -> Complex64 {
        match self.grid.index_of(k) {
            Some((s, false)) => self.comps[c][s],
            Some((s, true)) => self.comps[c][s].conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Adds `v` to `ĝ_c(k)` and `conj(v)` to `ĝ_c(−k)`, i.e. adds the real
    /// function `v e^{ik·x} + c.c.` (or its real part when `k ≡ −k`).
    pub fn add_mode(&mut self, c: usize, k: [i64; 3], v: Complex64) -> Result<(), SpectralError> {
        let (s, conj) = self.grid.index_of(k).ok_or(SpectralError::OffGrid(k))?;
        let minus = [-k[0], -k[1], -k[2]];
        let (t, _) = self.grid.index_of(minus).ok_or(SpectralError::OffGrid(minus))?;
        let n = self.grid.n() as i64;
        if k.iter().all(|c| (2 * c).rem_euclid(n) == 0) {
            // self-conjugate wavevector (zero or Nyquist corner)
            self.comps[c][s] += Complex64::new(2.0 * v.re, 0.0);
            return Ok(());
        }
        let stored = if conj { v.conj() } else { v };
        self.comps[c][s] += stored;
        if k[0] == 0 || k[0].unsigned_abs() as usize == self.grid.n() / 2 {
            self.comps[c][t] += stored.conj();
        }
        Ok(())
    }

    pub fn set_zero(&mut self) {
        for c in &mut self.comps {
            c.fill(Complex64::new(0.0, 0.0));
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        debug_assert_eq!(self.comps.len(), x.comps.len());
        for (c, xc) in self.comps.iter_mut().zip(&x.comps) {
            for (v, w) in c.iter_mut().zip(xc) {
                *v += w * a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Real `L²` inner product over the torus.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for s in 0..a.len() {
                acc += g.weight(s) * (a[s] * b[s].conj()).re;
            }
        }
        acc * g.volume()
    }

    pub fn norm_l2_squared(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_squared().sqrt()
    }

    /// Spatial mean of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        self.comps[c][0].re
    }

    /// Sum over stored modes of `weight · f(s) · |ĝ(k)|²`, times the torus volume.
    pub fn weighted_energy(&self, f: impl Fn(usize) -> f64) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for c in &self.comps {
            for (s, v) in c.iter().enumerate() {
                let m = v.norm_sqr();
                if m != 0.0 {
                    acc += g.weight(s) * f(s) * m;
                }
            }
        }
        acc * g.volume()
    }

    /// Multiplies each stored coefficient by a real symbol.
    pub fn apply_symbol(&mut self, f: impl Fn(usize) -> f64) {
        let len = self.grid.spectral_len();
        for s in 0..len {
            let m = f(s);
            for c in &mut self.comps {
                c[s] *= m;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.norm()))
    }
}
