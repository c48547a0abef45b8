use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{NormKind, NormSpec};
use crate::error::{Error, Result};
use crate::measures::DistributionFamily;

/// A convex body through its gauge, with optional closed-form volume and an
/// isotropic uniform sampler when one is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub name: String,
    pub gauge: NormSpec,
    pub volume: Option<f64>,
    pub isotropic: bool,
}

impl BodySpec {
    /// `[-sqrt 3, sqrt 3]^n`, the isotropic cube.
    pub fn isotropic_cube(n: usize) -> Result<Self> {
        let s = 3f64.sqrt();
        Ok(Self {
            name: "cube".into(),
            gauge: NormSpec::new(NormKind::WeightedLp { p: f64::INFINITY, weights: vec![s.recip(); n] }, n)?,
            volume: Some((2.0 * s).powi(n as i32)),
            isotropic: true,
        })
    }

    /// Euclidean ball of radius `sqrt(n + 2)`, the isotropic ball.
    pub fn isotropic_ball(n: usize) -> Result<Self> {
        let r = ((n + 2) as f64).sqrt();
        let nf = n as f64;
        let log_vol = 0.5 * nf * std::f64::consts::PI.ln() - ln_gamma(0.5 * nf + 1.0) + nf * r.ln();
        Ok(Self {
            name: "ball".into(),
            gauge: NormSpec::new(NormKind::WeightedLp { p: 2.0, weights: vec![r.recip(); n] }, n)?,
            volume: Some(log_vol.exp()),
            isotropic: true,
        })
    }

    /// `cube` or `ball`.
    pub fn from_name(name: &str, n: usize) -> Result<Self> {
        match name {
            "cube" => Self::isotropic_cube(n),
            "ball" => Self::isotropic_ball(n),
            other => Err(Error::Config(format!("unknown body '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.gauge.dim
    }

    /// Uniform distribution on the body, when available.
    pub fn uniform(&self) -> Result<DistributionFamily> {
        match self.name.as_str() {
            "cube" => Ok(DistributionFamily::cube(self.dim())),
            "ball" => Ok(DistributionFamily::ball(self.dim())),
            _ => Err(Error::Capability(format!("no uniform sampler for body '{}'", self.name))),
        }
    }
}

/// `L_K = |K|^{-1/n}` for an isotropic body of known volume.
pub fn isotropic_constant(body: &BodySpec) -> Result<f64> {
    if !body.isotropic {
        return Err(Error::Precondition(format!("body '{}' is not isotropic", body.name)));
    }
    let vol = body
        .volume
        .ok_or_else(|| Error::Capability(format!("volume of '{}' is unknown", body.name)))?;
    Ok((-vol.ln() / body.dim() as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_constants() {
        let cube = 1.0 / (2.0 * 3f64.sqrt());
        for n in [1, 2, 5, 40] {
            assert!((isotropic_constant(&BodySpec::isotropic_cube(n).unwrap()).unwrap() - cube).abs() < 1e-14);
        }
        let disc = isotropic_constant(&BodySpec::isotropic_ball(2).unwrap()).unwrap();
        assert!((disc - (4.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn unknown_volume() {
        let b = BodySpec { name: "x".into(), gauge: NormSpec::euclidean(2), volume: None, isotropic: true };
        assert!(matches!(isotropic_constant(&b), Err(Error::Capability(_))));
    }
}
