use serde::{Deserialize, Serialize};

use super::NormSpec;
use crate::error::{Error, Result};
use crate::measures::DistributionFamily;
use crate::rng::RngStream;
use crate::stats::{chi_mean, gaussian_abs_mean, gaussian_max_abs_mean, MeanEstimate};

pub const MIN_WIDTH_SAMPLES: usize = 10_000;

/// `c_n = E|Γ|` in dimension `n`.
pub fn c_n(n: usize) -> f64 {
    chi_mean(n)
}

/// `E‖Γ‖`: exact for ℓ¹, ℓ², ℓ∞ (the last by quadrature), Monte Carlo otherwise.
pub fn gaussian_norm_expectation(spec: &NormSpec, samples: usize, stream: RngStream) -> Result<MeanEstimate> {
    let n = spec.dim;
    match spec.plain_p() {
        Some(p) if p == 1.0 => return Ok(MeanEstimate::exact(n as f64 * gaussian_abs_mean())),
        Some(p) if p == 2.0 => return Ok(MeanEstimate::exact(chi_mean(n))),
        Some(p) if p.is_infinite() => return Ok(MeanEstimate::exact(gaussian_max_abs_mean(n))),
        _ => {}
    }
    gaussian_norm_monte_carlo(spec, samples, stream)
}

/// `E‖Γ‖` by Monte Carlo regardless of the norm.
pub fn gaussian_norm_monte_carlo(spec: &NormSpec, samples: usize, stream: RngStream) -> Result<MeanEstimate> {
    if samples < MIN_WIDTH_SAMPLES {
        return Err(Error::Config(format!("need at least {MIN_WIDTH_SAMPLES} samples, got {samples}")));
    }
    monte_carlo(spec, samples, stream, false)
}

fn monte_carlo(spec: &NormSpec, samples: usize, stream: RngStream, on_sphere: bool) -> Result<MeanEstimate> {
    let failed = std::sync::Mutex::new(None);
    let est = DistributionFamily::gaussian(spec.dim).expectation(samples, stream, |x| {
        let scale = if on_sphere { x.iter().map(|v| v * v).sum::<f64>().sqrt().recip() } else { 1.0 };
        match spec.gauge(x) {
            Ok(g) => g * scale,
            Err(e) => {
                failed.lock().expect("poisoned").get_or_insert(e);
                f64::NAN
            }
        }
    })?;
    match failed.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

/// Mean width `M(K) = ∫ ‖θ‖_K dσ(θ)` over the unit sphere, sampled as `Γ/|Γ|`.
/// Exactly 1 for the Euclidean ball.
pub fn mean_width_m(spec: &NormSpec, samples: usize, stream: RngStream) -> Result<MeanEstimate> {
    if spec.plain_p() == Some(2.0) {
        return Ok(MeanEstimate::exact(1.0));
    }
    if samples < MIN_WIDTH_SAMPLES {
        return Err(Error::Config(format!("need at least {MIN_WIDTH_SAMPLES} samples, got {samples}")));
    }
    monte_carlo(spec, samples, stream, true)
}

/// `M*(K) = M(K°)`.
pub fn mean_width_mstar(spec: &NormSpec, samples: usize, stream: RngStream) -> Result<MeanEstimate> {
    mean_width_m(&spec.polar()?, samples, stream)
}

/// Mean widths and the normalization linking them to Gaussian expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub norm: String,
    pub n: usize,
    pub m: MeanEstimate,
    pub m_star: MeanEstimate,
    pub c_n: f64,
    /// `E‖Γ‖_K`, to compare with `M · c_n`.
    pub gaussian: MeanEstimate,
    /// `(M c_n - E‖Γ‖) / combined SE`
    pub consistency_z: f64,
    pub seed: u64,
}

pub fn width_report(spec: &NormSpec, samples: usize, stream: RngStream) -> Result<WidthReport> {
    let m = mean_width_m(spec, samples, stream.purpose("m"))?;
    let m_star = mean_width_mstar(spec, samples, stream.purpose("m-star"))?;
    let gaussian = gaussian_norm_expectation(spec, samples, stream.purpose("gaussian"))?;
    let cn = c_n(spec.dim);
    let se = (m.std_error * cn).hypot(gaussian.std_error);
    let diff = m.mean * cn - gaussian.mean;
    let consistency_z = if se > 0.0 { diff / se } else if diff.abs() < 1e-12 * gaussian.mean { 0.0 } else { f64::INFINITY };
    Ok(WidthReport { norm: spec.name(), n: spec.dim, m, m_star, c_n: cn, gaussian, consistency_z, seed: stream.seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let l2 = NormSpec::euclidean(2);
        assert!((gaussian_norm_expectation(&l2, 0, RngStream::root(0)).unwrap().mean - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-14);
        let l1 = NormSpec::lp(1.0, 10).unwrap();
        assert!((gaussian_norm_expectation(&l1, 0, RngStream::root(0)).unwrap().mean - 7.978845608).abs() < 1e-8);
        assert_eq!(mean_width_m(&NormSpec::euclidean(7), 0, RngStream::root(0)).unwrap().mean, 1.0);
        assert_eq!(mean_width_mstar(&NormSpec::euclidean(7), 0, RngStream::root(0)).unwrap().mean, 1.0);
        assert!((c_n(10) - 3.0844).abs() < 1e-4);
    }
}
