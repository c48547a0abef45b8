use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{measure_moments, DiscreteMeasure, PointCloud};
use crate::error::{Error, Result};
use crate::rng::{par_chunks, RngStream, StreamRng, CHUNK};
use crate::stats::{merge_all, normal_cdf, MeanEstimate, Running};

/// Convex truncation regions for the standard Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "region")]
pub enum Region {
    Whole,
    /// `[-h, h]^n`
    Cube { half_width: f64 },
    /// `|x_axis| <= h`
    Slab { axis: usize, half_width: f64 },
    /// `<normal, x> >= offset`
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Whole => true,
            Region::Cube { half_width } => x.iter().all(|v| v.abs() <= *half_width),
            Region::Slab { axis, half_width } => x[*axis].abs() <= *half_width,
            Region::HalfSpace { normal, offset } => {
                normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= *offset
            }
        }
    }

    /// Gaussian measure of the region, i.e. the rejection acceptance rate.
    pub fn gaussian_mass(&self, dim: usize) -> f64 {
        match self {
            Region::Whole => 1.0,
            Region::Cube { half_width } => (2.0 * normal_cdf(*half_width) - 1.0).powi(dim as i32),
            Region::Slab { half_width, .. } => 2.0 * normal_cdf(*half_width) - 1.0,
            Region::HalfSpace { normal, offset } => {
                let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                1.0 - normal_cdf(offset / len)
            }
        }
    }

    /// Invariant under `x -> -x`.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Region::HalfSpace { .. })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Region::Whole => true,
            Region::Cube { half_width } => *half_width > 0.0,
            Region::Slab { axis, half_width } => *axis < dim && *half_width > 0.0,
            Region::HalfSpace { normal, offset } => {
                normal.len() == dim && offset.is_finite() && normal.iter().any(|v| *v != 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid truncation region {self:?} in dimension {dim}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FamilyKind {
    StandardGaussian,
    /// Coordinates `E_i - 1` with `E_i` unit exponential.
    ProductExponentialCentered,
    /// Uniform on `[-sqrt 3, sqrt 3]^n`.
    UniformCubeIsotropic,
    /// Uniform on the ball of radius `sqrt(n + 2)`.
    UniformBallIsotropic,
    /// Standard Gaussian conditioned on a convex region.
    TruncatedGaussian(Region),
    /// Independent coordinates in `{-1, +1}` with `P(+1) = p`.
    TwoPoint { p: f64 },
    CustomDiscrete(DiscreteMeasure),
}

/// A member of the sampling catalog in a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFamily {
    pub kind: FamilyKind,
    pub dim: usize,
}

impl DistributionFamily {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        match &kind {
            FamilyKind::TruncatedGaussian(r) => r.validate(dim)?,
            FamilyKind::TwoPoint { p } if !(0.0..=1.0).contains(p) => {
                return Err(Error::Config(format!("two-point weight {p} outside [0, 1]")))
            }
            FamilyKind::CustomDiscrete(m) if m.dim() != dim => {
                return Err(Error::Config("custom measure dimension mismatch".into()))
            }
            _ => {}
        }
        Ok(Self { kind, dim })
    }

    pub fn gaussian(dim: usize) -> Self {
        Self { kind: FamilyKind::StandardGaussian, dim }
    }

    pub fn exponential(dim: usize) -> Self {
        Self { kind: FamilyKind::ProductExponentialCentered, dim }
    }

    pub fn cube(dim: usize) -> Self {
        Self { kind: FamilyKind::UniformCubeIsotropic, dim }
    }

    pub fn ball(dim: usize) -> Self {
        Self { kind: FamilyKind::UniformBallIsotropic, dim }
    }

    pub fn truncated(region: Region, dim: usize) -> Result<Self> {
        Self::new(FamilyKind::TruncatedGaussian(region), dim)
    }

    pub fn custom(measure: DiscreteMeasure) -> Self {
        let dim = measure.dim();
        Self { kind: FamilyKind::CustomDiscrete(measure), dim }
    }

    /// Parse a catalog identifier.
    ///
    /// Accepted: `gaussian`, `exp`, `cube`, `ball`, `two-point[:p]`,
    /// `truncated-cube:h`, `truncated-slab:h` (axis 0), `halfspace` (x1 >= 0),
    /// plus the long kebab-case kind names.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        let mut parts = name.split(':');
        let head = parts.next().unwrap_or_default();
        let arg = parts.next().map(str::parse::<f64>).transpose().map_err(|e| {
            Error::Config(format!("bad parameter in family '{name}': {e}"))
        })?;
        let kind = match head {
            "gaussian" | "standard-gaussian" => FamilyKind::StandardGaussian,
            "exp" | "product-exponential-centered" => FamilyKind::ProductExponentialCentered,
            "cube" | "uniform-cube-isotropic" => FamilyKind::UniformCubeIsotropic,
            "ball" | "uniform-ball-isotropic" => FamilyKind::UniformBallIsotropic,
            "two-point" | "twopoint" => FamilyKind::TwoPoint { p: arg.unwrap_or(0.5) },
            "truncated-cube" => {
                FamilyKind::TruncatedGaussian(Region::Cube { half_width: arg.unwrap_or(1.0) })
            }
            "truncated-slab" => FamilyKind::TruncatedGaussian(Region::Slab {
                axis: 0,
                half_width: arg.unwrap_or(0.5),
            }),
            "halfspace" => {
                let mut normal = vec![0.0; dim];
                normal[0] = 1.0;
                FamilyKind::TruncatedGaussian(Region::HalfSpace { normal, offset: arg.unwrap_or(0.0) })
            }
            other => return Err(Error::Config(format!("unknown distribution family '{other}'"))),
        };
        Self::new(kind, dim)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            FamilyKind::StandardGaussian => "gaussian".into(),
            FamilyKind::ProductExponentialCentered => "exp".into(),
            FamilyKind::UniformCubeIsotropic => "cube".into(),
            FamilyKind::UniformBallIsotropic => "ball".into(),
            FamilyKind::TwoPoint { p } => format!("two-point:{p}"),
            FamilyKind::TruncatedGaussian(Region::Whole) => "truncated-whole".into(),
            FamilyKind::TruncatedGaussian(Region::Cube { half_width }) => {
                format!("truncated-cube:{half_width}")
            }
            FamilyKind::TruncatedGaussian(Region::Slab { half_width, .. }) => {
                format!("truncated-slab:{half_width}")
            }
            FamilyKind::TruncatedGaussian(Region::HalfSpace { offset, .. }) => {
                format!("halfspace:{offset}")
            }
            FamilyKind::CustomDiscrete(_) => "custom".into(),
        }
    }

    /// Mean zero and identity covariance.
    pub fn is_isotropic(&self) -> bool {
        match &self.kind {
            FamilyKind::StandardGaussian
            | FamilyKind::ProductExponentialCentered
            | FamilyKind::UniformCubeIsotropic
            | FamilyKind::UniformBallIsotropic => true,
            FamilyKind::TruncatedGaussian(r) => *r == Region::Whole,
            FamilyKind::TwoPoint { p } => *p == 0.5,
            FamilyKind::CustomDiscrete(m) => measure_moments(m, 2).is_ok_and(|s| {
                s.mean.amax() < 1e-8
                    && (&s.covariance - nalgebra::DMatrix::identity(self.dim, self.dim)).amax() < 1e-8
            }),
        }
    }

    /// Law invariant under `x -> -x`.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            FamilyKind::StandardGaussian
            | FamilyKind::UniformCubeIsotropic
            | FamilyKind::UniformBallIsotropic => true,
            FamilyKind::ProductExponentialCentered => false,
            FamilyKind::TruncatedGaussian(r) => r.is_symmetric(),
            FamilyKind::TwoPoint { p } => *p == 0.5,
            FamilyKind::CustomDiscrete(_) => false,
        }
    }

    /// Mean zero.
    pub fn is_centered(&self) -> bool {
        match &self.kind {
            FamilyKind::ProductExponentialCentered => true,
            FamilyKind::CustomDiscrete(m) => measure_moments(m, 2).is_ok_and(|s| s.mean.amax() < 1e-8),
            _ => self.is_symmetric(),
        }
    }

    /// Draw `count` i.i.d. points; deterministic in `stream`.
    pub fn sample(&self, count: usize, stream: RngStream) -> Result<PointCloud> {
        if count == 0 {
            return Err(Error::Input("sample count must be positive".into()));
        }
        let sampler = self.sampler()?;
        let dim = self.dim;
        let chunks = par_chunks(stream, count, CHUNK, |k, rng| {
            let mut buf = vec![0.0; k * dim];
            for p in buf.chunks_exact_mut(dim) {
                sampler.draw(rng, p);
            }
            buf
        });
        PointCloud::new(dim, chunks.concat())
    }

    /// Monte-Carlo mean of `f(X)` over `count` draws, without storing them.
    pub fn expectation<F>(&self, count: usize, stream: RngStream, f: F) -> Result<MeanEstimate>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        Ok(self.expectations(count, stream, 1, |x, out| out[0] = f(x))?[0])
    }

    /// Joint Monte-Carlo means of the `k` outputs of `f(X, out)`.
    pub fn expectations<F>(&self, count: usize, stream: RngStream, k: usize, f: F) -> Result<Vec<MeanEstimate>>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        if count == 0 {
            return Err(Error::Input("sample count must be positive".into()));
        }
        let sampler = self.sampler()?;
        let dim = self.dim;
        let parts = par_chunks(stream, count, CHUNK, |c, rng| {
            let mut x = vec![0.0; dim];
            let mut out = vec![0.0; k];
            let mut acc = vec![Running::default(); k];
            for _ in 0..c {
                sampler.draw(rng, &mut x);
                f(&x, &mut out);
                for (a, v) in acc.iter_mut().zip(&out) {
                    a.push(*v);
                }
            }
            acc
        });
        Ok((0..k).map(|j| merge_all(parts.iter().map(|p| &p[j])).estimate()).collect())
    }

    /// Per-point sampler, for callers that stream samples without storing them.
    pub fn sampler(&self) -> Result<Sampler<'_>> {
        let weights = match &self.kind {
            FamilyKind::TruncatedGaussian(r) => {
                let mass = r.gaussian_mass(self.dim);
                if mass < 1e-4 {
                    return Err(Error::Capability(format!(
                        "rejection acceptance rate {mass:e} is below 1e-4"
                    )));
                }
                None
            }
            FamilyKind::CustomDiscrete(m) => Some(
                WeightedIndex::new(m.weights()).map_err(|e| Error::Input(e.to_string()))?,
            ),
            _ => None,
        };
        Ok(Sampler { family: self, weights })
    }
}

pub struct Sampler<'a> {
    family: &'a DistributionFamily,
    weights: Option<WeightedIndex<f64>>,
}

impl Sampler<'_> {
    pub fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let n = self.family.dim;
        match &self.family.kind {
            FamilyKind::StandardGaussian => fill_gaussian(rng, out),
            FamilyKind::ProductExponentialCentered => {
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *v = e - 1.0;
                }
            }
            FamilyKind::UniformCubeIsotropic => {
                let s = 3f64.sqrt();
                for v in out.iter_mut() {
                    *v = rng.random_range(-s..s);
                }
            }
            FamilyKind::UniformBallIsotropic => {
                let radius = ((n + 2) as f64).sqrt();
                loop {
                    fill_gaussian(rng, out);
                    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        let u: f64 = rng.random();
                        let scale = radius * u.powf(1.0 / n as f64) / norm;
                        out.iter_mut().for_each(|v| *v *= scale);
                        break;
                    }
                }
            }
            FamilyKind::TruncatedGaussian(region) => loop {
                fill_gaussian(rng, out);
                if region.contains(out) {
                    break;
                }
            },
            FamilyKind::TwoPoint { p } => {
                for v in out.iter_mut() {
                    *v = if rng.random::<f64>() < *p { 1.0 } else { -1.0 };
                }
            }
            FamilyKind::CustomDiscrete(m) => {
                let idx = self.weights.as_ref().expect("weights built for custom").sample(rng);
                out.copy_from_slice(m.atom(idx));
            }
        }
    }
}

pub(crate) fn fill_gaussian(rng: &mut StreamRng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}
