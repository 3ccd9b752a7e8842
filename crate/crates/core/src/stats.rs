//! Small statistics toolkit for time averages and ensemble estimates.

use crate::forcing::NoiseStream;

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// standard error of the slope
    pub slope_se: f64,
}

/// Ordinary least squares `y ≈ a + b x`. Needs at least two distinct `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(LinearFit { slope, intercept, r2, slope_se })
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    s[lo] * (1.0 - f) + s[hi] * f
}

/// Percentile bootstrap interval for the median.
pub fn bootstrap_median_ci(v: &[f64], resamples: usize, level: f64, stream: &mut NoiseStream) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut meds = Vec::with_capacity(resamples);
    let mut u = vec![0.0; v.len()];
    let mut sample = vec![0.0; v.len()];
    for _ in 0..resamples {
        stream.fill_uniform(&mut u);
        for (s, x) in sample.iter_mut().zip(&u) {
            let i = ((x * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
            *s = v[i];
        }
        meds.push(median(&sample));
    }
    meds.sort_by(|a, b| a.total_cmp(b));
    let a = (1.0 - level) / 2.0;
    (quantile_sorted(&meds, a), quantile_sorted(&meds, 1.0 - a))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    /// standard error of the mean from the spread of batch averages
    pub stderr: f64,
    pub batches: usize,
}

/// Non-overlapping batch means; trailing samples that do not fill a batch
/// are dropped from the error bar but kept in the mean.
pub fn batch_means(series: &[f64], batches: usize) -> BatchMeans {
    let n = series.len();
    let mean = if n == 0 { f64::NAN } else { series.iter().sum::<f64>() / n as f64 };
    let size = n.checked_div(batches).unwrap_or(0);
    if size == 0 || batches < 2 {
        return BatchMeans { mean, stderr: f64::NAN, batches: 0 };
    }
    let avgs: Vec<f64> =
        (0..batches).map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = avgs.iter().sum::<f64>() / batches as f64;
    let var = avgs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    BatchMeans { mean, stderr: (var / batches as f64).sqrt(), batches }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftTest {
    pub first_half: f64,
    pub second_half: f64,
    /// combined standard error of the difference
    pub sigma: f64,
    pub drifted: bool,
}

/// Compares the means of the two halves of a series; a difference above
/// two combined standard errors (batch means, 10 batches per half) flags drift.
pub fn split_half_drift(series: &[f64]) -> DriftTest {
    let h = series.len() / 2;
    let a = batch_means(&series[..h], 10);
    let b = batch_means(&series[h..2 * h], 10);
    let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    let drifted = sigma.is_finite() && (a.mean - b.mean).abs() > 2.0 * sigma;
    DriftTest { first_half: a.mean, second_half: b.mean, sigma, drifted }
}
