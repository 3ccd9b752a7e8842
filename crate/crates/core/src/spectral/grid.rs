use std::fmt;
use std::sync::Arc;

use super::SpectralError;

/// Uniform grid on the periodic box `[0, 2π)^d` with `n` points per axis.
///
/// Spectral coefficients are stored on the half spectrum `k₁ ≥ 0`. The storage
/// index of a wavevector is `i₁ + nh·(j₂ + n·j₃)` with `nh = n/2 + 1`, where
/// `j ↦ k = j` for `j ≤ n/2` and `k = j − n` otherwise. Real samples are stored
/// with `x₁` varying fastest: `i₁ + n·(i₂ + n·i₃)`.
#[derive(Clone)]
pub struct Grid {
    tables: Arc<Tables>,
}

struct Tables {
    dim: usize,
    n: usize,
    waves: Vec<[i32; 3]>,
    k2: Vec<f64>,
    keep: Vec<bool>,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self, SpectralError> {
        if dim != 2 && dim != 3 {
            return Err(SpectralError::Dimension(dim));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::Resolution(n));
        }
        let nh = n / 2 + 1;
        let len = nh * n.pow(dim as u32 - 1);
        let signed = |j: usize| -> i32 {
            if j <= n / 2 {
                j as i32
            } else {
                j as i32 - n as i32
            }
        };
        let mut waves = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        for s in 0..len {
            let i1 = s % nh;
            let rest = s / nh;
            let j2 = rest % n;
            let j3 = rest / n;
            let k = [i1 as i32, signed(j2), if dim == 3 { signed(j3) } else { 0 }];
            k2.push(k.iter().map(|&c| (c as f64) * (c as f64)).sum());
            waves.push(k);
        }
        let kmax = (n / 3) as i32;
        let keep = waves.iter().map(|k| k.iter().all(|c| c.abs() <= kmax)).collect();
        Ok(Grid { tables: Arc::new(Tables { dim, n, waves, k2, keep }) })
    }

    pub fn dim(&self) -> usize {
        self.tables.dim
    }

    pub fn n(&self) -> usize {
        self.tables.n
    }

    /// Number of stored entries along the halved axis.
    pub fn nh(&self) -> usize {
        self.tables.n / 2 + 1
    }

    /// Largest wavenumber component kept by the 2/3 rule.
    pub fn k_max_dealiased(&self) -> usize {
        self.tables.n / 3
    }

    pub fn real_len(&self) -> usize {
        self.tables.n.pow(self.tables.dim as u32)
    }

    pub fn spectral_len(&self) -> usize {
        self.tables.waves.len()
    }

    /// Grid spacing `2π/n`.
    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.tables.n as f64
    }

    /// Volume of the torus, `(2π)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powi(self.tables.dim as i32)
    }

    /// Wavevector of a storage index; the third component is 0 when `d = 2`.
    #[inline]
    pub fn wave(&self, s: usize) -> [i32; 3] {
        self.tables.waves[s]
    }

    #[inline]
    pub fn k_squared(&self, s: usize) -> f64 {
        self.tables.k2[s]
    }

    pub fn k_squared_table(&self) -> &[f64] {
        &self.tables.k2
    }

    pub fn waves(&self) -> &[[i32; 3]] {
        &self.tables.waves
    }

    /// Multiplicity of a stored coefficient in full-spectrum sums.
    #[inline]
    pub fn weight(&self, s: usize) -> f64 {
        let k1 = self.tables.waves[s][0];
        if k1 == 0 || k1 as usize == self.tables.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// `max_j |k_j|` for a storage index.
    #[inline]
    pub fn sup_norm(&self, s: usize) -> i32 {
        let k = self.tables.waves[s];
        k[0].abs().max(k[1].abs()).max(k[2].abs())
    }

    /// True when the index is a retained mode under the 2/3 rule.
    #[inline]
    pub fn is_dealiased(&self, s: usize) -> bool {
        self.tables.keep[s]
    }

    /// `is_dealiased` for every storage index.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.tables.keep
    }

    /// Storage index for a full-spectrum wavevector, with a flag telling whether
    /// the stored value must be conjugated (the index holds `−k`).
    pub fn index_of(&self, k: [i64; 3]) -> Option<(usize, bool)> {
        let n = self.tables.n as i64;
        let dim = self.tables.dim;
        if dim == 2 && k[2] != 0 {
            return None;
        }
        if k.iter().take(dim).any(|c| c.abs() > n / 2) {
            return None;
        }
        let (k, conj) = if k[0] < 0 { ([-k[0], -k[1], -k[2]], true) } else { (k, false) };
        let wrap = |c: i64| -> usize { c.rem_euclid(n) as usize };
        let nh = (n / 2 + 1) as usize;
        let n = n as usize;
        let s = k[0] as usize + nh * (wrap(k[1]) + n * if dim == 3 { wrap(k[2]) } else { 0 });
        Some((s, conj))
    }

    /// Real-space coordinate of a sample index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.tables.n;
        let dx = self.dx();
        let i1 = idx % n;
        let i2 = (idx / n) % n;
        let i3 = idx / (n * n);
        [i1 as f64 * dx, i2 as f64 * dx, if self.dim() == 3 { i3 as f64 * dx } else { 0.0 }]
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.tables.dim == other.tables.dim && self.tables.n == other.tables.n
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.tables.dim).field("n", &self.tables.n).finish()
    }
}
