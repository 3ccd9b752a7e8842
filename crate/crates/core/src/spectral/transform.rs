use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::{Complex64, Grid, Rank, SpectralError, SpectralField};

/// Reusable FFT plans and work buffers for one grid. Not shared between
/// threads; each worker owns its own.
pub struct Transform {
    grid: Grid,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    row: Vec<f64>,
    work: Vec<Complex64>,
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Transform {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let mut rp = RealFftPlanner::<f64>::new();
        let r2c = rp.plan_fft_forward(n);
        let c2r = rp.plan_fft_inverse(n);
        let mut cp = FftPlanner::<f64>::new();
        let fwd = cp.plan_fft_forward(n);
        let inv = cp.plan_fft_inverse(n);
        let scratch_len = r2c
            .get_scratch_len()
            .max(c2r.get_scratch_len())
            .max(fwd.get_inplace_scratch_len())
            .max(inv.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Transform {
            grid: grid.clone(),
            r2c,
            c2r,
            fwd,
            inv,
            row: vec![0.0; n],
            work: vec![zero; grid.spectral_len()],
            lines: vec![zero; grid.spectral_len()],
            scratch: vec![zero; scratch_len],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Real samples to half-spectrum coefficients, normalized by `n^{-d}`.
    pub fn forward(&mut self, real: &[f64], out: &mut [Complex64]) -> Result<(), SpectralError> {
        self.forward_impl(real, out, false)
    }

    /// Forward transform followed by the 2/3-rule truncation. Columns that the
    /// truncation discards are never transformed.
    pub fn forward_dealiased(&mut self, real: &[f64], out: &mut [Complex64]) -> Result<(), SpectralError> {
        self.forward_impl(real, out, true)
    }

    fn forward_impl(&mut self, real: &[f64], out: &mut [Complex64], truncate: bool) -> Result<(), SpectralError> {
        let g = self.grid.clone();
        check_len(real.len(), g.real_len())?;
        check_len(out.len(), g.spectral_len())?;
        let (n, nh) = (g.n(), g.nh());
        for r in 0..g.real_len() / n {
            self.row.copy_from_slice(&real[r * n..(r + 1) * n]);
            self.r2c
                .process_with_scratch(&mut self.row, &mut out[r * nh..(r + 1) * nh], &mut self.scratch)
                .expect("buffer sizes fixed at plan time");
        }
        let active = if truncate { g.k_max_dealiased() + 1 } else { nh };
        self.axis2(out, active, false);
        if g.dim() == 3 {
            self.axis3(out, active, false);
        }
        let norm = 1.0 / g.real_len() as f64;
        if truncate {
            let mask = g.dealias_mask();
            for (v, &keep) in out.iter_mut().zip(mask) {
                *v = if keep { *v * norm } else { Complex64::new(0.0, 0.0) };
            }
        } else {
            for v in out.iter_mut() {
                *v *= norm;
            }
        }
        Ok(())
    }

    /// Half-spectrum coefficients to real samples. Imaginary parts that the
    /// reality condition forces to zero are dropped.
    pub fn backward(&mut self, spec: &[Complex64], out: &mut [f64]) -> Result<(), SpectralError> {
        let g = self.grid.clone();
        check_len(spec.len(), g.spectral_len())?;
        check_len(out.len(), g.real_len())?;
        let (n, nh) = (g.n(), g.nh());
        // Lines with k₁ beyond the last nonzero column stay zero through the
        // axis transforms, which matters for dealiased input.
        let mut active = 0;
        for (s, v) in spec.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                active = active.max(s % nh + 1);
            }
        }
        let mut work = std::mem::take(&mut self.work);
        work.copy_from_slice(spec);
        if g.dim() == 3 {
            self.axis3(&mut work, active, true);
        }
        self.axis2(&mut work, active, true);
        for r in 0..g.real_len() / n {
            let line = &mut work[r * nh..(r + 1) * nh];
            line[0].im = 0.0;
            line[nh - 1].im = 0.0;
            // realfft still transforms when it reports non-real end values
            let _ = self.c2r.process_with_scratch(line, &mut out[r * n..(r + 1) * n], &mut self.scratch);
        }
        self.work = work;
        Ok(())
    }

    pub fn forward_field(&mut self, comps: &[&[f64]]) -> Result<SpectralField, SpectralError> {
        let rank = if comps.len() == 1 { Rank::Scalar } else { Rank::Vector };
        let mut f = SpectralField::zeros(&self.grid, rank);
        if f.n_components() != comps.len() {
            return Err(SpectralError::Length { expected: f.n_components(), got: comps.len() });
        }
        for (c, real) in comps.iter().enumerate() {
            self.forward(real, f.comp_mut(c))?;
        }
        Ok(f)
    }

    pub fn backward_field(&mut self, f: &SpectralField) -> Vec<Vec<f64>> {
        (0..f.n_components())
            .map(|c| {
                let mut out = vec![0.0; self.grid.real_len()];
                self.backward(f.comp(c), &mut out).expect("field lives on this grid");
                out
            })
            .collect()
    }

    /// Transforms along the second axis every line with `i₁ < active`.
    fn axis2(&mut self, data: &mut [Complex64], active: usize, inverse: bool) {
        if active == 0 {
            return;
        }
        let (n, nh) = (self.grid.n(), self.grid.nh());
        let plane = nh * n;
        let fft = if inverse { &self.inv } else { &self.fwd };
        for block in data.chunks_mut(plane) {
            for j2 in 0..n {
                let row = &block[j2 * nh..j2 * nh + active];
                for (i1, v) in row.iter().enumerate() {
                    self.lines[i1 * n + j2] = *v;
                }
            }
            fft.process_with_scratch(&mut self.lines[..active * n], &mut self.scratch);
            for j2 in 0..n {
                let row = &mut block[j2 * nh..j2 * nh + active];
                for (i1, v) in row.iter_mut().enumerate() {
                    *v = self.lines[i1 * n + j2];
                }
            }
        }
    }

    fn axis3(&mut self, data: &mut [Complex64], active: usize, inverse: bool) {
        if active == 0 {
            return;
        }
        let (n, nh) = (self.grid.n(), self.grid.nh());
        let plane = nh * n;
        let fft = if inverse { &self.inv } else { &self.fwd };
        let mut p = 0;
        for l in 0..plane {
            if l % nh >= active {
                continue;
            }
            for j3 in 0..n {
                self.lines[p * n + j3] = data[l + plane * j3];
            }
            p += 1;
        }
        fft.process_with_scratch(&mut self.lines[..p * n], &mut self.scratch);
        let mut p = 0;
        for l in 0..plane {
            if l % nh >= active {
                continue;
            }
            for j3 in 0..n {
                data[l + plane * j3] = self.lines[p * n + j3];
            }
            p += 1;
        }
    }
}

fn check_len(got: usize, expected: usize) -> Result<(), SpectralError> {
    if got == expected {
        Ok(())
    } else {
        Err(SpectralError::Length { expected, got })
    }
}

/// One-shot forward transform of a scalar sample array.
pub fn transform_forward(real: &[f64], grid: &Grid) -> Result<SpectralField, SpectralError> {
    Transform::new(grid).forward_field(&[real])
}

/// One-shot backward transform; returns one sample array per component.
pub fn transform_backward(f: &SpectralField) -> Vec<Vec<f64>> {
    Transform::new(f.grid()).backward_field(f)
}
