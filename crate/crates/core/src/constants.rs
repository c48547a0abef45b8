//! Estimators for the thin-shell variance `var |X|` and the third-moment
//! constant `τ² = sup_θ Σ_{i,j} (E X_i X_j <X, θ>)²`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::linalg::power_iteration;
use crate::measures::{DistributionFamily, PointCloud, ThirdMomentAccumulator};
use crate::rng::{par_chunks, RngStream, CHUNK};
use crate::stats::{merge_all, quantile_sorted, Running};

pub const MIN_SIGMA_SAMPLES: usize = 1_000;
pub const MIN_TAU_SAMPLES: usize = 10_000;
pub const MIN_RESTRICTED_SAMPLES: usize = 10_000;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const JACKKNIFE_BLOCKS: usize = 10;
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 10_000;

/// Sample variance of `|X|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub family: String,
    pub n: usize,
    pub sample_count: usize,
    pub variance: f64,
    /// Standard deviation of the bootstrap replicates.
    pub std_error: f64,
    /// 95% percentile bootstrap interval.
    pub ci: [f64; 2],
    pub mean_norm: f64,
    pub seed: u64,
}

impl SigmaEstimate {
    /// `|variance - target| <= k` half-widths of the bootstrap interval.
    pub fn within_intervals(&self, target: f64, k: f64) -> bool {
        (self.variance - target).abs() <= k * 0.5 * (self.ci[1] - self.ci[0])
    }
}

fn require_isotropic(family: &DistributionFamily) -> Result<()> {
    if family.is_isotropic() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{} is not isotropic", family.name())))
    }
}

/// Unbiased sample variance of `|X|` with a percentile bootstrap interval.
pub fn estimate_sigma(family: &DistributionFamily, samples: usize, stream: RngStream) -> Result<SigmaEstimate> {
    require_isotropic(family)?;
    if samples < MIN_SIGMA_SAMPLES {
        return Err(Error::Config(format!("sigma needs at least {MIN_SIGMA_SAMPLES} samples, got {samples}")));
    }
    let pts = family.sample(samples, stream.purpose("samples"))?;
    let norms: Vec<f64> = pts.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let full: Running = norms.iter().copied().collect();
    let boot_stream = stream.purpose("bootstrap");
    let mut reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = boot_stream.substream(b).rng();
            let mut r = Running::default();
            for _ in 0..samples {
                r.push(norms[rng.random_range(0..samples)]);
            }
            r.variance()
        })
        .collect();
    let spread: Running = reps.iter().copied().collect();
    reps.sort_by(f64::total_cmp);
    Ok(SigmaEstimate {
        family: family.name(),
        n: family.dim,
        sample_count: samples,
        variance: full.variance(),
        std_error: spread.variance().sqrt(),
        ci: [quantile_sorted(&reps, 0.025), quantile_sorted(&reps, 0.975)],
        mean_norm: full.mean,
        seed: stream.seed,
    })
}

/// Top eigenpair of the pair contraction of the sample third-moment tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub family: String,
    pub n: usize,
    pub sample_count: usize,
    pub tau_squared: f64,
    pub tau: f64,
    /// Maximizing unit direction.
    pub theta: Vec<f64>,
    /// Delete-one-block jackknife standard error of `tau`.
    pub std_error: f64,
    pub iterations: usize,
    pub seed: u64,
}

struct TauFit {
    tau_squared: f64,
    theta: Vec<f64>,
    iterations: usize,
}

fn tau_of(acc: &ThirdMomentAccumulator) -> Result<TauFit> {
    let m = acc.finish().pair_contraction();
    let it = power_iteration(&m, POWER_TOLERANCE, POWER_MAX_ITER)?;
    Ok(TauFit { tau_squared: it.eigenvalue.max(0.0), theta: it.eigenvector.iter().copied().collect(), iterations: it.iterations })
}

/// τ̂ from per-block accumulators (the blocks also drive the jackknife).
fn tau_from_blocks(name: String, n: usize, blocks: &[ThirdMomentAccumulator], seed: u64) -> Result<TauEstimate> {
    let mut total = ThirdMomentAccumulator::new(n);
    for b in blocks {
        total.merge(b);
    }
    let fit = tau_of(&total)?;
    let loo: Vec<f64> = (0..blocks.len())
        .into_par_iter()
        .map(|skip| {
            let mut acc = ThirdMomentAccumulator::new(n);
            for (i, b) in blocks.iter().enumerate() {
                if i != skip {
                    acc.merge(b);
                }
            }
            tau_of(&acc).map(|f| f.tau_squared.sqrt())
        })
        .collect::<Result<_>>()?;
    let b = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / b;
    let jack = ((b - 1.0) / b * loo.iter().map(|t| (t - mean).powi(2)).sum::<f64>()).sqrt();
    Ok(TauEstimate {
        family: name,
        n,
        sample_count: total.count(),
        tau_squared: fit.tau_squared,
        tau: fit.tau_squared.sqrt(),
        theta: fit.theta,
        std_error: jack,
        iterations: fit.iterations,
        seed,
    })
}

/// τ̂ for `samples` draws of an isotropic family, without storing the draws.
pub fn estimate_tau(family: &DistributionFamily, samples: usize, stream: RngStream) -> Result<TauEstimate> {
    require_isotropic(family)?;
    if samples < MIN_TAU_SAMPLES {
        return Err(Error::Config(format!("tau needs at least {MIN_TAU_SAMPLES} samples, got {samples}")));
    }
    let sampler = family.sampler()?;
    let n = family.dim;
    let chunks = par_chunks(stream, samples, CHUNK, |count, rng| {
        let mut acc = ThirdMomentAccumulator::new(n);
        let mut x = vec![0.0; n];
        for _ in 0..count {
            sampler.draw(rng, &mut x);
            acc.push(&x);
        }
        acc
    });
    let blocks = group_blocks(n, &chunks);
    tau_from_blocks(family.name(), n, &blocks, stream.seed)
}

/// τ̂ for a fixed sample (points are used as given, no centering).
pub fn tau_from_samples(points: &PointCloud, seed: u64) -> Result<TauEstimate> {
    if points.len() < JACKKNIFE_BLOCKS {
        return Err(Error::Input("too few samples for the jackknife".into()));
    }
    let n = points.dim();
    let chunks: Vec<ThirdMomentAccumulator> = points
        .as_flat()
        .par_chunks(CHUNK * n)
        .map(|c| {
            let mut acc = ThirdMomentAccumulator::new(n);
            c.chunks_exact(n).for_each(|x| acc.push(x));
            acc
        })
        .collect();
    let blocks = group_blocks(n, &chunks);
    tau_from_blocks("sample".into(), n, &blocks, seed)
}

/// Merge consecutive chunks into at most `JACKKNIFE_BLOCKS` blocks.
fn group_blocks(n: usize, chunks: &[ThirdMomentAccumulator]) -> Vec<ThirdMomentAccumulator> {
    let k = JACKKNIFE_BLOCKS.min(chunks.len()).max(1);
    let mut blocks: Vec<ThirdMomentAccumulator> = (0..k).map(|_| ThirdMomentAccumulator::new(n)).collect();
    for (c, acc) in chunks.iter().enumerate() {
        blocks[c * k / chunks.len()].merge(acc);
    }
    blocks
}

/// `C · sqrt(Σ_k σ_k² / k)` for `sigma[k-1] = σ_k`.
pub fn tau_bound_from_sigma(sigma: &[f64], constant: f64) -> Result<f64> {
    if sigma.is_empty() {
        return Err(Error::Input("sigma sequence is empty".into()));
    }
    if sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::Input("sigma values must be finite and non-negative".into()));
    }
    let sum: f64 = sigma.iter().enumerate().map(|(k, s)| s * s / (k + 1) as f64).sum();
    Ok(constant * sum.sqrt())
}

/// Events `F` for the restricted-expectation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "event")]
pub enum Event {
    /// `|X| > r`
    NormAbove { r: f64 },
    /// `X_1 > r`
    FirstAbove { r: f64 },
}

impl Event {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Event::NormAbove { r } => x.iter().map(|v| v * v).sum::<f64>().sqrt() > r,
            Event::FirstAbove { r } => x[0] > r,
        }
    }

    fn is_empty(&self) -> bool {
        match *self {
            Event::NormAbove { r } | Event::FirstAbove { r } => r == f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedReport {
    pub family: String,
    pub norm: String,
    pub event: Event,
    pub sample_count: usize,
    pub probability: f64,
    /// `E(‖X‖; F)`
    pub restricted_mean: f64,
    pub full_mean: f64,
    /// `E(‖X‖; F) / (sqrt P(F) · E‖X‖)`
    pub ratio: f64,
    pub seed: u64,
}

/// Ratio `E(‖X‖ 1_F) / (sqrt(P(F)) E‖X‖)` by Monte Carlo.
pub fn restricted_norm_expectation(
    family: &DistributionFamily,
    norm: &NormSpec,
    event: Event,
    samples: usize,
    stream: RngStream,
) -> Result<RestrictedReport> {
    if samples < MIN_RESTRICTED_SAMPLES {
        return Err(Error::Config(format!("need at least {MIN_RESTRICTED_SAMPLES} samples, got {samples}")));
    }
    if norm.dim != family.dim {
        return Err(Error::Input("norm and family dimensions differ".into()));
    }
    let sampler = family.sampler()?;
    let n = family.dim;
    let parts = par_chunks(stream, samples, CHUNK, |count, rng| {
        let mut x = vec![0.0; n];
        let (mut full, mut restricted, mut hits) = (Running::default(), 0.0, 0usize);
        for _ in 0..count {
            sampler.draw(rng, &mut x);
            let g = norm.gauge(&x)?;
            full.push(g);
            if event.contains(&x) {
                restricted += g;
                hits += 1;
            }
        }
        Ok((full, restricted, hits))
    });
    let parts: Vec<(Running, f64, usize)> = parts.into_iter().collect::<Result<_>>()?;
    let full = merge_all(parts.iter().map(|p| &p.0));
    let restricted = parts.iter().map(|p| p.1).sum::<f64>() / samples as f64;
    let hits: usize = parts.iter().map(|p| p.2).sum();
    let probability = hits as f64 / samples as f64;
    let ratio = if event.is_empty() {
        0.0
    } else if hits < 10 {
        return Err(Error::Capability(format!(
            "event observed {hits} times in {samples} samples; too rare to estimate"
        )));
    } else {
        restricted / (probability.sqrt() * full.mean)
    };
    Ok(RestrictedReport {
        family: family.name(),
        norm: norm.name(),
        event,
        sample_count: samples,
        probability,
        restricted_mean: restricted,
        full_mean: full.mean,
        ratio,
        seed: stream.seed,
    })
}

/// Isotropic log-concave members of the catalog in dimension `n`.
pub fn log_concave_catalog(n: usize) -> Vec<DistributionFamily> {
    vec![
        DistributionFamily::gaussian(n),
        DistributionFamily::exponential(n),
        DistributionFamily::cube(n),
        DistributionFamily::ball(n),
    ]
}

/// Per-family values and their maximum. The maximum over a finite catalog only
/// bounds the supremum over all isotropic log-concave laws from below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogBound {
    pub quantity: String,
    pub n: usize,
    pub per_family: Vec<(String, f64)>,
    pub lower_bound: f64,
    pub note: String,
}

fn catalog_bound(quantity: &str, n: usize, per_family: Vec<(String, f64)>) -> CatalogBound {
    let lower_bound = per_family.iter().map(|p| p.1).fold(0.0, f64::max);
    CatalogBound {
        quantity: quantity.into(),
        n,
        per_family,
        lower_bound,
        note: "maximum over the catalog; a lower bound on the supremum over all isotropic log-concave laws".into(),
    }
}

pub fn catalog_tau(n: usize, samples: usize, stream: RngStream) -> Result<CatalogBound> {
    let per = log_concave_catalog(n)
        .iter()
        .map(|f| Ok((f.name(), estimate_tau(f, samples, stream.purpose(&f.name()))?.tau)))
        .collect::<Result<_>>()?;
    Ok(catalog_bound("tau", n, per))
}

pub fn catalog_sigma(n: usize, samples: usize, stream: RngStream) -> Result<CatalogBound> {
    let per = log_concave_catalog(n)
        .iter()
        .map(|f| Ok((f.name(), estimate_sigma(f, samples, stream.purpose(&f.name()))?.variance.sqrt())))
        .collect::<Result<_>>()?;
    Ok(catalog_bound("sigma", n, per))
}
