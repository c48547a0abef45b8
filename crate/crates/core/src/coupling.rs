//! Gaussian extension of stopped martingales and the convex-order comparisons
//! against the standard Gaussian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, psd_sqrt, sym_eigen};
use crate::localization::StoppedPath;
use crate::measures::{sample_moments, DistributionFamily, FamilyKind, PointCloud};
use crate::rng::RngStream;
use crate::stats::{chi_mean, gaussian_abs_mean, gaussian_max_abs_mean, MeanEstimate, Running};

/// Eigenvalues of `QV` may leave `[0, 1]` by this much.
pub const QV_TOLERANCE: f64 = 1e-8;
pub const MIN_CONFORMANCE_SAMPLES: usize = 1000;
pub const MIN_DOMINANCE_ENDPOINTS: usize = 1000;

/// Terminal value `M_∞` of a martingale started at 0 together with its
/// quadratic variation `[M]_∞ ⪯ id`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleEndpoint {
    pub m: DVector<f64>,
    pub qv: DMatrix<f64>,
    /// `(id - QV)^{1/2}`
    gap_sqrt: DMatrix<f64>,
}

impl MartingaleEndpoint {
    pub fn new(m: Vec<f64>, qv: DMatrix<f64>) -> Result<Self> {
        let n = m.len();
        if n == 0 || qv.nrows() != n || qv.ncols() != n {
            return Err(Error::Input("endpoint and quadratic variation dimensions differ".into()));
        }
        if m.iter().chain(qv.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("endpoint has non-finite entries".into()));
        }
        let (vals, _) = sym_eigen(&qv);
        if let Some(l) = vals.iter().find(|&&l| l > 1.0 + QV_TOLERANCE || l < -QV_TOLERANCE) {
            return Err(Error::Invariant(format!(
                "quadratic variation eigenvalue {l} outside [0, 1] (tolerance {QV_TOLERANCE:e})"
            )));
        }
        let gap = DMatrix::identity(n, n) - &qv;
        let gap_sqrt = psd_sqrt(&gap, QV_TOLERANCE)?;
        Ok(Self { m: DVector::from_vec(m), qv, gap_sqrt })
    }

    /// Stopped localization path rescaled by `1/sqrt(theta)`, so that
    /// `[a]_T ⪯ theta·id` becomes `QV ⪯ id`.
    pub fn from_stopped(path: &StoppedPath, theta: f64) -> Result<Self> {
        let n = path.increment.len();
        let s = theta.sqrt().recip();
        let qv = DMatrix::from_row_slice(n, n, &path.qv) / theta;
        Self::new(path.increment.iter().map(|v| v * s).collect(), crate::linalg::symmetrize(&qv))
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }
}

/// `Y = M + (id - QV)^{1/2} g` and `Z = M - (id - QV)^{1/2} g`.
pub fn maurey_extend(endpoint: &MartingaleEndpoint, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if g.len() != endpoint.dim() {
        return Err(Error::Input("Gaussian draw has the wrong dimension".into()));
    }
    let s = &endpoint.gap_sqrt * DVector::from_column_slice(g);
    let y = endpoint.m.iter().zip(s.iter()).map(|(m, s)| m + s).collect();
    let z = endpoint.m.iter().zip(s.iter()).map(|(m, s)| m - s).collect();
    Ok((y, z))
}

/// Apply [`maurey_extend`] to every endpoint; endpoint `i` draws `g` from
/// `stream.substream(i)`. Returns the `Y` and `Z` clouds.
pub fn maurey_sample(endpoints: &[MartingaleEndpoint], stream: RngStream) -> Result<(PointCloud, PointCloud)> {
    let n = endpoints.first().ok_or_else(|| Error::Input("no endpoints".into()))?.dim();
    if endpoints.iter().any(|e| e.dim() != n) {
        return Err(Error::Input("endpoints have mixed dimensions".into()));
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = endpoints
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut rng = stream.substream(i as u64).rng();
            let mut g = vec![0.0; n];
            crate::measures::fill_gaussian(&mut rng, &mut g);
            maurey_extend(e, &g)
        })
        .collect::<Result<_>>()?;
    let (ys, zs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((PointCloud::new(n, ys.concat())?, PointCloud::new(n, zs.concat())?))
}

/// Convex functionals with known or cheaply estimated Gaussian expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "phi")]
pub enum ConvexFunctional {
    L1,
    L2,
    Linf,
    /// `max_k <v_k, x>`
    MaxLinear { forms: Vec<Vec<f64>> },
}

impl ConvexFunctional {
    /// `l1`, `l2`, `linf`, or `max-linear` (forms `e_1, ..., e_n` and `(1, ..., 1)/sqrt n`).
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            "linf" => Ok(Self::Linf),
            "max-linear" => {
                let mut forms: Vec<Vec<f64>> = (0..dim)
                    .map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect())
                    .collect();
                forms.push(vec![(dim as f64).sqrt().recip(); dim]);
                Ok(Self::MaxLinear { forms })
            }
            other => Err(Error::Config(format!("unknown convex functional '{other}'"))),
        }
    }

    pub fn catalog(dim: usize) -> Vec<Self> {
        ["l1", "l2", "linf", "max-linear"]
            .iter()
            .map(|n| Self::from_name(n, dim).expect("catalog names parse"))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::L1 => "l1",
            Self::L2 => "l2",
            Self::Linf => "linf",
            Self::MaxLinear { .. } => "max-linear",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::L1 => x.iter().map(|v| v.abs()).sum(),
            Self::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Self::Linf => x.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            Self::MaxLinear { forms } => forms
                .iter()
                .map(|f| f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Self::MaxLinear { forms } if forms.is_empty() || forms.iter().any(|f| f.len() != dim) => {
                Err(Error::Config("linear forms must be non-empty and match the dimension".into()))
            }
            _ => Ok(()),
        }
    }

    /// `E φ(Γ)` in dimension `dim`: closed form for the norms, Monte Carlo otherwise.
    pub fn gaussian_expectation(&self, dim: usize, samples: usize, stream: RngStream) -> Result<MeanEstimate> {
        self.check_dim(dim)?;
        Ok(match self {
            Self::L1 => MeanEstimate::exact(dim as f64 * gaussian_abs_mean()),
            Self::L2 => MeanEstimate::exact(chi_mean(dim)),
            Self::Linf => MeanEstimate::exact(gaussian_max_abs_mean(dim)),
            Self::MaxLinear { .. } => DistributionFamily::gaussian(dim).expectation(samples, stream, |x| self.eval(x))?,
        })
    }
}

/// One tested statistic: estimate, reference and z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub name: String,
    pub estimate: f64,
    pub reference: f64,
    pub std_error: f64,
    pub ci: [f64; 2],
    pub z: f64,
}

impl Deviation {
    fn new(name: String, estimate: f64, reference: f64, std_error: f64) -> Self {
        let diff = estimate - reference;
        let z = if std_error > 0.0 {
            diff.abs() / std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self { name, estimate, reference, std_error, ci: [estimate - 1.96 * std_error, estimate + 1.96 * std_error], z }
    }
}

/// Moment and norm agreement of a sample with the standard Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub sample_count: usize,
    pub dim: usize,
    /// `|mean|`
    pub mean_deviation: f64,
    /// `‖cov - id‖_op`
    pub covariance_deviation: f64,
    pub deviations: Vec<Deviation>,
    /// Every `z` must stay at or below this.
    pub threshold_z: f64,
    pub pass: bool,
    pub seed: Option<u64>,
}

/// Compare a sample with `N(0, id)` through its mean, covariance entries and the
/// expected ℓ¹, ℓ², ℓ∞ norms, each at `threshold_z` standard errors.
pub fn gaussian_conformance(samples: &PointCloud, threshold_z: f64, seed: Option<u64>) -> Result<ConformanceReport> {
    let count = samples.len();
    if count < MIN_CONFORMANCE_SAMPLES {
        return Err(Error::Input(format!(
            "conformance needs at least {MIN_CONFORMANCE_SAMPLES} samples, got {count}"
        )));
    }
    let n = samples.dim();
    let mut coords = vec![Running::default(); n];
    for p in samples.iter() {
        for (c, v) in coords.iter_mut().zip(p) {
            c.push(*v);
        }
    }
    let mean: Vec<f64> = coords.iter().map(|c| c.mean).collect();
    let mut prods = vec![Running::default(); n * (n + 1) / 2];
    let mut norms = [Running::default(), Running::default(), Running::default()];
    let catalog = [ConvexFunctional::L1, ConvexFunctional::L2, ConvexFunctional::Linf];
    for p in samples.iter() {
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                prods[k].push((p[i] - mean[i]) * (p[j] - mean[j]));
                k += 1;
            }
        }
        for (r, phi) in norms.iter_mut().zip(&catalog) {
            r.push(phi.eval(p));
        }
    }
    let mut deviations = Vec::new();
    for (i, c) in coords.iter().enumerate() {
        deviations.push(Deviation::new(format!("mean[{i}]"), c.mean, 0.0, c.std_error()));
    }
    let bessel = count as f64 / (count as f64 - 1.0);
    let mut cov_err = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let est = prods[k].mean * bessel;
            let target = f64::from(u8::from(i == j));
            cov_err[(i, j)] = est - target;
            cov_err[(j, i)] = est - target;
            deviations.push(Deviation::new(format!("cov[{i}][{j}]"), est, target, prods[k].std_error()));
            k += 1;
        }
    }
    let stream = RngStream::root(0);
    for (r, phi) in norms.iter().zip(&catalog) {
        let reference = phi.gaussian_expectation(n, 0, stream)?.mean;
        deviations.push(Deviation::new(format!("E {}", phi.name()), r.mean, reference, r.std_error()));
    }
    let pass = deviations.iter().all(|d| d.z <= threshold_z);
    Ok(ConformanceReport {
        sample_count: count,
        dim: n,
        mean_deviation: mean.iter().map(|v| v * v).sum::<f64>().sqrt(),
        covariance_deviation: crate::linalg::op_norm_sym(&cov_err),
        deviations,
        threshold_z,
        pass,
        seed,
    })
}

/// One-sided comparison `E φ(·) - E φ(Γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub phi: String,
    pub expectation: MeanEstimate,
    pub gaussian: MeanEstimate,
    pub gap: f64,
    pub std_error: f64,
    pub ci: [f64; 2],
    /// `gap / std_error`; the comparison holds when this is at most the allowance.
    pub z: f64,
    pub seed: u64,
}

impl GapReport {
    fn new(phi: &ConvexFunctional, expectation: MeanEstimate, gaussian: MeanEstimate, seed: u64) -> Self {
        let gap = expectation.mean - gaussian.mean;
        let se = expectation.std_error.hypot(gaussian.std_error);
        let z = if se > 0.0 { gap / se } else if gap <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        Self {
            phi: phi.name().into(),
            expectation,
            gaussian,
            gap,
            std_error: se,
            ci: [gap - 1.96 * se, gap + 1.96 * se],
            z,
            seed,
        }
    }

    /// `gap <= k · SE`
    pub fn holds(&self, k: f64) -> bool {
        self.gap <= k * self.std_error
    }
}

/// Samples used for Monte-Carlo Gaussian references.
pub const GAUSSIAN_REFERENCE_SAMPLES: usize = 200_000;

/// `E φ(M_∞)` against `E φ(Γ)` over a population of endpoints.
pub fn convex_dominance_check(
    endpoints: &[MartingaleEndpoint],
    phi: &ConvexFunctional,
    stream: RngStream,
) -> Result<GapReport> {
    if endpoints.len() < MIN_DOMINANCE_ENDPOINTS {
        return Err(Error::Input(format!(
            "dominance check needs at least {MIN_DOMINANCE_ENDPOINTS} endpoints, got {}",
            endpoints.len()
        )));
    }
    let n = endpoints[0].dim();
    if endpoints.iter().any(|e| e.dim() != n) {
        return Err(Error::Input("endpoints have mixed dimensions".into()));
    }
    phi.check_dim(n)?;
    let ex: Running = endpoints.iter().map(|e| phi.eval(e.m.as_slice())).collect();
    let gaussian = phi.gaussian_expectation(n, GAUSSIAN_REFERENCE_SAMPLES, stream.purpose("gaussian-reference"))?;
    Ok(GapReport::new(phi, ex.estimate(), gaussian, stream.seed))
}

/// Covariance of a truncated Gaussian against the untruncated `B⁻¹ = id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrascampLiebReport {
    pub family: String,
    pub sample_count: usize,
    pub mean: Vec<f64>,
    /// Row-major sample covariance.
    pub covariance: Vec<f64>,
    /// Per-entry standard errors of the covariance, row-major.
    pub covariance_se: Vec<f64>,
    /// Smallest eigenvalue of `id - cov(X)`.
    pub margin: f64,
    /// Frobenius norm of the per-entry standard errors.
    pub std_error: f64,
    /// `margin >= -4 · std_error`
    pub pass: bool,
    pub seed: u64,
}

fn gaussian_region(family: &DistributionFamily) -> Result<()> {
    match family.kind {
        FamilyKind::StandardGaussian | FamilyKind::TruncatedGaussian(_) => Ok(()),
        _ => Err(Error::Config(format!(
            "{} is not a (truncated) standard Gaussian family",
            family.name()
        ))),
    }
}

/// Estimate `cov(X)` for a Gaussian restricted to a convex region and check
/// `cov(X) ⪯ id` up to sampling error.
pub fn brascamp_lieb_check(family: &DistributionFamily, samples: usize, stream: RngStream) -> Result<BrascampLiebReport> {
    gaussian_region(family)?;
    if samples < 2 {
        return Err(Error::Input("need at least two samples".into()));
    }
    let n = family.dim;
    let pts = family.sample(samples, stream)?;
    let summary = sample_moments(&pts, 2)?;
    let mean: Vec<f64> = summary.mean.iter().copied().collect();
    let mut se = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let r: Running = pts.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).collect();
            se[i * n + j] = r.std_error();
            se[j * n + i] = r.std_error();
        }
    }
    let margin = min_eigenvalue(&(DMatrix::identity(n, n) - &summary.covariance));
    let std_error = se.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(BrascampLiebReport {
        family: family.name(),
        sample_count: samples,
        mean,
        covariance: summary.covariance.transpose().iter().copied().collect(),
        covariance_se: se,
        margin,
        std_error,
        pass: margin >= -4.0 * std_error,
        seed: stream.seed,
    })
}

/// `E φ(X) - E φ(Γ)` for a centered truncated Gaussian `X`; expected `<= 0`.
pub fn harge_check(
    family: &DistributionFamily,
    phi: &ConvexFunctional,
    samples: usize,
    stream: RngStream,
) -> Result<GapReport> {
    gaussian_region(family)?;
    if !family.is_centered() {
        return Err(Error::Precondition(format!(
            "{} is not centered; the comparison requires E X = 0",
            family.name()
        )));
    }
    phi.check_dim(family.dim)?;
    let ex = family.expectation(samples, stream, |x| phi.eval(x))?;
    let gaussian = phi.gaussian_expectation(family.dim, GAUSSIAN_REFERENCE_SAMPLES, stream.purpose("gaussian-reference"))?;
    Ok(GapReport::new(phi, ex, gaussian, stream.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Region;

    fn endpoint(m: Vec<f64>, qv: &[f64]) -> MartingaleEndpoint {
        let n = m.len();
        MartingaleEndpoint::new(m, DMatrix::from_row_slice(n, n, qv)).unwrap()
    }

    #[test]
    fn full_variation_leaves_the_endpoint() {
        let e = endpoint(vec![0.3, -0.2], &[1.0, 0.0, 0.0, 1.0]);
        let (y, z) = maurey_extend(&e, &[1.5, -0.7]).unwrap();
        assert_eq!(y, vec![0.3, -0.2]);
        assert_eq!(z, vec![0.3, -0.2]);
    }

    #[test]
    fn zero_variation_is_pure_noise() {
        let e = endpoint(vec![0.0, 0.0], &[0.0; 4]);
        let (y, z) = maurey_extend(&e, &[1.5, -0.7]).unwrap();
        assert_eq!(y, vec![1.5, -0.7]);
        assert_eq!(z, vec![-1.5, 0.7]);
    }

    #[test]
    fn excess_variation_rejected() {
        let r = MartingaleEndpoint::new(vec![0.0], DMatrix::from_element(1, 1, 1.0 + 1e-6));
        assert!(matches!(r, Err(Error::Invariant(_))));
        assert!(MartingaleEndpoint::new(vec![0.0], DMatrix::from_element(1, 1, 1.0 + 1e-9)).is_ok());
    }

    #[test]
    fn unknown_functional() {
        assert!(matches!(ConvexFunctional::from_name("l3", 2), Err(Error::Config(_))));
    }

    #[test]
    fn zero_endpoints_are_dominated() {
        let es: Vec<_> = (0..1000).map(|_| endpoint(vec![0.0, 0.0], &[0.0; 4])).collect();
        for phi in ConvexFunctional::catalog(2) {
            let r = convex_dominance_check(&es, &phi, RngStream::root(1)).unwrap();
            assert!(r.holds(3.0), "{phi:?}");
        }
    }

    #[test]
    fn conformance_negative_control() {
        let pts = DistributionFamily::gaussian(3).sample(20_000, RngStream::root(3)).unwrap();
        let half = pts.map_points(|x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = v * 0.5f64.sqrt();
            }
        });
        let r = gaussian_conformance(&half, 4.0, None).unwrap();
        assert!(!r.pass);
        assert!((r.covariance_deviation - 0.5).abs() < 0.05);
    }

    #[test]
    fn non_centered_family_rejected() {
        let f = DistributionFamily::truncated(Region::HalfSpace { normal: vec![1.0], offset: 0.0 }, 1).unwrap();
        let r = harge_check(&f, &ConvexFunctional::L2, 1000, RngStream::root(0));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn non_gaussian_family_rejected() {
        let r = brascamp_lieb_check(&DistributionFamily::cube(2), 100, RngStream::root(0));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
