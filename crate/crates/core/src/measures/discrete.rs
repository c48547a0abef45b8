use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

/// Finitely many weighted atoms in R^n.
///
/// Weights are non-negative and sum to one within 1e-12; atoms are pairwise
/// distinct and share one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    dimension: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureJson> for DiscreteMeasure {
    type Error = Error;
    fn try_from(j: MeasureJson) -> Result<Self> {
        let m = DiscreteMeasure::new(j.atoms, j.weights)?;
        if m.dim != j.dimension {
            return Err(Error::Input(format!(
                "declared dimension {} but atoms have dimension {}",
                j.dimension, m.dim
            )));
        }
        Ok(m)
    }
}

impl From<DiscreteMeasure> for MeasureJson {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureJson {
            dimension: m.dim,
            atoms: m.atoms.chunks_exact(m.dim).map(<[f64]>::to_vec).collect(),
            weights: m.weights,
        }
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = atoms.first().map(Vec::len).unwrap_or(0);
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::Input("atoms of mixed dimension".into()));
        }
        Self::from_flat(dim, atoms.concat(), weights)
    }

    pub fn from_flat(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.is_empty() {
            return Err(Error::Input("a measure needs at least one atom of positive dimension".into()));
        }
        if atoms.len() != dim * weights.len() {
            return Err(Error::Input(format!(
                "{} weights for {} coordinates in dimension {dim}",
                weights.len(),
                atoms.len()
            )));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite atom coordinate".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Input("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Input(format!("weights sum to {total}, not 1")));
        }
        let m = Self { dim, atoms, weights };
        let mut order: Vec<usize> = (0..m.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(m.atom(a), m.atom(b)));
        if order.windows(2).any(|w| m.atom(w[0]) == m.atom(w[1])) {
            return Err(Error::Input("atoms must be pairwise distinct".into()));
        }
        Ok(m)
    }

    /// Normalize arbitrary non-negative masses.
    pub fn normalized(atoms: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Input("total mass must be positive and finite".into()));
        }
        Self::new(atoms, masses.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let k = atoms.len();
        Self::new(atoms, vec![1.0 / k as f64; k])
    }

    pub fn dirac(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Atoms `-1` (mass `1 - p`) and `+1` (mass `p`) on the line.
    pub fn two_point(p: f64) -> Result<Self> {
        Self::new(vec![vec![-1.0], vec![1.0]], vec![1.0 - p, p])
    }

    /// Empirical law of a sample; coinciding points are merged.
    pub fn empirical(points: &PointCloud) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("empty sample".into()));
        }
        let dim = points.dim();
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(points.point(a), points.point(b)));
        let unit = 1.0 / points.len() as f64;
        let mut atoms: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for idx in order {
            let p = points.point(idx);
            match weights.last_mut() {
                Some(w) if &atoms[atoms.len() - dim..] == p => *w += unit,
                _ => {
                    atoms.extend_from_slice(p);
                    weights.push(unit);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self::from_flat(dim, atoms, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.atoms.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Same weights, atoms pushed through `f`.
    pub fn map_atoms(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let atoms: Vec<Vec<f64>> = self.atoms.chunks_exact(self.dim).map(f).collect();
        Self::new(atoms, self.weights.clone())
    }

    /// Drop atoms carrying zero mass.
    pub fn support(&self) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        let atoms = keep.iter().flat_map(|&i| self.atom(i).to_vec()).collect();
        let weights = keep.iter().map(|&i| self.weights[i]).collect();
        Self { dim: self.dim, atoms, weights }
    }
}
