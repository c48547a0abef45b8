//! Running moments, standard errors, and a few closed-form distributions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Welford accumulator; `merge` is Chan's parallel update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Running {
    pub count: usize,
    pub mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Running) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn estimate(&self) -> MeanEstimate {
        MeanEstimate { mean: self.mean, std_error: self.std_error(), count: self.count }
    }
}

impl FromIterator<f64> for Running {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut r = Running::default();
        iter.into_iter().for_each(|x| r.push(x));
        r
    }
}

/// Merge per-chunk accumulators in order.
pub fn merge_all<'a>(parts: impl IntoIterator<Item = &'a Running>) -> Running {
    let mut acc = Running::default();
    for p in parts {
        acc.merge(p);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, std_error: 0.0, count: 0 }
    }

    /// `|self - target| <= k * SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Point estimate with uncertainty, sample count and the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub sample_count: usize,
    pub std_error: f64,
    pub ci: [f64; 2],
    pub seed: u64,
}

impl EstimatorReport {
    /// Normal-approximation 95% interval.
    pub fn from_mean(m: MeanEstimate, seed: u64) -> Self {
        Self {
            estimate: m.mean,
            sample_count: m.count,
            std_error: m.std_error,
            ci: [m.mean - 1.96 * m.std_error, m.mean + 1.96 * m.std_error],
            seed,
        }
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// E|Γ₁| = sqrt(2/π).
pub fn gaussian_abs_mean() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

/// E max_i |Γ_i| for a standard Gaussian in dimension `n`, by quadrature of
/// `∫₀^∞ 1 - (2Φ(t) - 1)^n dt`.
pub fn gaussian_max_abs_mean(n: usize) -> f64 {
    let tail = |t: f64| {
        let q = 0.5 * erfc(t / std::f64::consts::SQRT_2);
        -(n as f64 * (-2.0 * q).ln_1p()).exp_m1()
    };
    simpson(tail, 0.0, 14.0, 8192)
}

/// E|Γ| for a standard Gaussian in dimension `n`, via log-gamma.
pub fn chi_mean(n: usize) -> f64 {
    let n = n as f64;
    std::f64::consts::SQRT_2 * (ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
}

/// var |Γ| = n - c_n².
pub fn chi_variance(n: usize) -> f64 {
    let c = chi_mean(n);
    n as f64 - c * c
}

/// Pearson chi-square goodness of fit; returns (statistic, p-value).
pub fn chi_square_gof(observed: &[usize], probs: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::Input("chi-square needs matching tables with >= 2 cells".into()));
    }
    let total: usize = observed.iter().sum();
    if total == 0 {
        return Err(Error::Input("chi-square on an empty table".into()));
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return Ok((f64::INFINITY, 0.0));
            }
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = (cells.max(2) - 1) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Empirical quantile of a sorted slice (linear interpolation).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let whole: Running = xs.iter().copied().collect();
        let a: Running = xs[..37].iter().copied().collect();
        let b: Running = xs[37..].iter().copied().collect();
        let merged = merge_all([&a, &b]);
        assert_relative_eq!(whole.mean, merged.mean, epsilon = 1e-14);
        assert_relative_eq!(whole.variance(), merged.variance(), epsilon = 1e-13);
    }

    #[test]
    fn chi_mean_closed_forms() {
        assert_relative_eq!(chi_mean(1), (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(chi_mean(2), (std::f64::consts::PI / 2.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(chi_variance(2), 2.0 - std::f64::consts::PI / 2.0, epsilon = 1e-13);
        // no overflow where Γ(n/2) itself would
        assert!(chi_mean(1000).is_finite());
        // E χ_n = √n (1 - 1/(4n) + 1/(32n²) + ...)
        let n = 1000.0_f64;
        assert_relative_eq!(chi_mean(1000), n.sqrt() * (1.0 - 0.25 / n + 1.0 / (32.0 * n * n)), epsilon = 1e-8);
    }

    #[test]
    fn gaussian_max_abs_reference() {
        assert_relative_eq!(gaussian_max_abs_mean(1), gaussian_abs_mean(), epsilon = 1e-10);
        // E max(|g1|, |g2|) = 2 / sqrt(π)
        assert_relative_eq!(gaussian_max_abs_mean(2), 2.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn simpson_integrates_quartic() {
        let s3 = 3f64.sqrt();
        // composite Simpson error for x⁴ is exactly (b-a) h⁴ / 180 · 24 / (2√3)
        let h = 2.0 * s3 / 64.0;
        let v = simpson(|x| x.powi(4) / (2.0 * s3), -s3, s3, 64);
        assert_relative_eq!(v, 9.0 / 5.0 + 2.0 * s3 * h.powi(4) / 180.0 * 24.0 / (2.0 * s3), epsilon = 1e-12);
    }

    #[test]
    fn chi_square_uniform_table() {
        let (stat, p) = chi_square_gof(&[50, 50], &[0.5, 0.5]).unwrap();
        assert_eq!(stat, 0.0);
        assert_relative_eq!(p, 1.0);
    }
}
