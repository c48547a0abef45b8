use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest facet or vertex list a polytope gauge accepts.
pub const MAX_POLYTOPE_SIZE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NormKind {
    /// `(Σ |x_i|^p)^{1/p}`, `p = inf` for the max norm.
    Lp { p: f64 },
    /// `(Σ (w_i |x_i|)^p)^{1/p}`
    WeightedLp { p: f64, weights: Vec<f64> },
    /// Gauge of `{x : <a_i, x> <= 1 for all i}`.
    Facets { normals: Vec<Vec<f64>> },
    /// Gauge of `conv{v_i}`.
    Vertices { points: Vec<Vec<f64>> },
    /// `|A x|` for a row-major `rows x dim` matrix.
    LinearMap { rows: usize, matrix: Vec<f64> },
}

/// A gauge `‖x‖_K = inf{λ > 0 : x ∈ λK}` of a convex body `K` containing the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    pub dim: usize,
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp(x: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        x.fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        x.map(f64::abs).sum()
    } else if p == 2.0 {
        x.map(|v| v * v).sum::<f64>().sqrt()
    } else {
        let v: Vec<f64> = x.map(f64::abs).collect();
        let top = v.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0.0;
        }
        top * v.iter().map(|a| (a / top).powf(p)).sum::<f64>().powf(p.recip())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl NormSpec {
    pub fn new(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let bad = |msg: String| Err(Error::Config(msg));
        match &kind {
            NormKind::Lp { p } if !(*p >= 1.0) => return bad(format!("p = {p} is below 1")),
            NormKind::WeightedLp { p, weights } => {
                if !(*p >= 1.0) {
                    return bad(format!("p = {p} is below 1"));
                }
                if weights.len() != dim || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return bad("weights must be positive, finite, one per coordinate".into());
                }
            }
            NormKind::Facets { normals: list } | NormKind::Vertices { points: list } => {
                if list.is_empty() || list.iter().any(|v| v.len() != dim || v.iter().any(|c| !c.is_finite())) {
                    return bad("polytope data must be non-empty finite vectors of the dimension".into());
                }
                if list.len() > MAX_POLYTOPE_SIZE {
                    return Err(Error::Capability(format!(
                        "{} facets/vertices exceed the limit of {MAX_POLYTOPE_SIZE}",
                        list.len()
                    )));
                }
            }
            NormKind::LinearMap { rows, matrix } => {
                if *rows == 0 || matrix.len() != rows * dim || matrix.iter().any(|v| !v.is_finite()) {
                    return bad("linear map must be a finite rows x dim matrix".into());
                }
            }
            _ => {}
        }
        Ok(Self { kind, dim })
    }

    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        Self::new(NormKind::Lp { p }, dim)
    }

    pub fn euclidean(dim: usize) -> Self {
        Self { kind: NormKind::Lp { p: 2.0 }, dim }
    }

    fn signed_basis(dim: usize) -> Vec<Vec<f64>> {
        (0..2 * dim)
            .map(|k| {
                let mut v = vec![0.0; dim];
                v[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect()
    }

    /// `[-1, 1]^n` through its `2n` facets.
    pub fn cube_facets(dim: usize) -> Result<Self> {
        Self::new(NormKind::Facets { normals: Self::signed_basis(dim) }, dim)
    }

    /// The cross-polytope `conv{±e_i}` through its `2n` vertices.
    pub fn cross_polytope_vertices(dim: usize) -> Result<Self> {
        Self::new(NormKind::Vertices { points: Self::signed_basis(dim) }, dim)
    }

    /// `l1`, `l2`, `linf`, `lp:<p>`, `cube` (facet form) or `cross` (vertex form).
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "l1" => Self::lp(1.0, dim),
            "l2" => Self::lp(2.0, dim),
            "linf" => Self::lp(f64::INFINITY, dim),
            "cube" => Self::cube_facets(dim),
            "cross" => Self::cross_polytope_vertices(dim),
            _ => match name.strip_prefix("lp:").map(str::parse::<f64>) {
                Some(Ok(p)) => Self::lp(p, dim),
                _ => Err(Error::Config(format!("unknown norm '{name}'"))),
            },
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            NormKind::Lp { p } if *p == 1.0 => "l1".into(),
            NormKind::Lp { p } if *p == 2.0 => "l2".into(),
            NormKind::Lp { p } if p.is_infinite() => "linf".into(),
            NormKind::Lp { p } => format!("lp:{p}"),
            NormKind::WeightedLp { p, .. } => format!("weighted-lp:{p}"),
            NormKind::Facets { .. } => "facets".into(),
            NormKind::Vertices { .. } => "vertices".into(),
            NormKind::LinearMap { .. } => "linear-map".into(),
        }
    }

    /// The unweighted ℓᵖ exponent, if this is one.
    pub fn plain_p(&self) -> Option<f64> {
        match self.kind {
            NormKind::Lp { p } => Some(p),
            _ => None,
        }
    }

    /// `‖x‖_K`; `+inf` when `x` lies outside every dilate of `K`.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Input(format!("point has dimension {}, norm has {}", x.len(), self.dim)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("point has non-finite coordinates".into()));
        }
        Ok(match &self.kind {
            NormKind::Lp { p } => lp(x.iter().copied(), *p),
            NormKind::WeightedLp { p, weights } => lp(x.iter().zip(weights).map(|(v, w)| v * w), *p),
            NormKind::Facets { normals } => normals.iter().map(|a| dot(a, x)).fold(0.0, f64::max),
            NormKind::Vertices { points } => vertex_gauge(points, x)?,
            NormKind::LinearMap { rows, matrix } => {
                lp((0..*rows).map(|r| dot(&matrix[r * self.dim..(r + 1) * self.dim], x)), 2.0)
            }
        })
    }

    /// Gauge of the polar body `K° = {y : <x, y> <= 1 for all x in K}`.
    pub fn polar(&self) -> Result<Self> {
        let kind = match &self.kind {
            NormKind::Lp { p } => NormKind::Lp { p: conjugate(*p) },
            NormKind::WeightedLp { p, weights } => {
                NormKind::WeightedLp { p: conjugate(*p), weights: weights.iter().map(|w| w.recip()).collect() }
            }
            NormKind::Facets { normals } => NormKind::Vertices { points: normals.clone() },
            NormKind::Vertices { points } => NormKind::Facets { normals: points.clone() },
            NormKind::LinearMap { rows, matrix } => {
                if *rows != self.dim {
                    return Err(Error::Capability("polar of a non-square linear-map norm".into()));
                }
                let a = DMatrix::from_row_slice(*rows, self.dim, matrix);
                let inv = a
                    .try_inverse()
                    .ok_or_else(|| Error::Capability("polar of a singular linear-map norm".into()))?;
                // |A x| has polar |A^{-T} y|
                let t = inv.transpose();
                NormKind::LinearMap { rows: *rows, matrix: t.transpose().iter().copied().collect() }
            }
        };
        Self::new(kind, self.dim)
    }
}

/// `min Σ λ_i` subject to `Σ λ_i v_i = x`, `λ >= 0`.
fn vertex_gauge(points: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    if x.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = points.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (k, &xk) in x.iter().enumerate() {
        let terms: Vec<_> = vars.iter().zip(points).map(|(&v, p)| (v, p[k])).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, xk);
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective().max(0.0)),
        Err(minilp::Error::Infeasible) => Ok(f64::INFINITY),
        Err(e) => Err(Error::Numerical(format!("vertex gauge LP: {e}"))),
    }
}
