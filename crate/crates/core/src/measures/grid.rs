use serde::{Deserialize, Serialize};

use super::DiscreteMeasure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl GridAxis {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }
}

/// Cell-centered regular lattice in 1D or 2D with normalized cell masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridJson", into = "GridJson")]
pub struct GridMeasure {
    axes: Vec<GridAxis>,
    /// Row-major over axes, last axis fastest.
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    dimension: usize,
    grid: GridAxes,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridAxes {
    axes: Vec<GridAxis>,
}

impl TryFrom<GridJson> for GridMeasure {
    type Error = Error;
    fn try_from(j: GridJson) -> Result<Self> {
        if j.dimension != j.grid.axes.len() {
            return Err(Error::Input("grid dimension does not match its axes".into()));
        }
        GridMeasure::from_weights(j.grid.axes, j.weights)
    }
}

impl From<GridMeasure> for GridJson {
    fn from(g: GridMeasure) -> Self {
        GridJson { dimension: g.axes.len(), grid: GridAxes { axes: g.axes }, weights: g.weights }
    }
}

const GRID_SUM_TOL: f64 = 1e-10;

impl GridMeasure {
    pub fn from_weights(axes: Vec<GridAxis>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&axes.len()) {
            return Err(Error::Input("grid measures are 1D or 2D".into()));
        }
        if axes.iter().any(|a| a.cells == 0 || !(a.hi > a.lo)) {
            return Err(Error::Input("grid axes need cells and a non-empty interval".into()));
        }
        let cells: usize = axes.iter().map(|a| a.cells).product();
        if weights.len() != cells {
            return Err(Error::Input(format!("{} weights for {cells} cells", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Input("grid weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > GRID_SUM_TOL {
            return Err(Error::Input(format!("grid weights sum to {total}")));
        }
        Ok(Self { axes, weights })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(GridAxis::width).product()
    }

    /// Density value (mass / cell volume) of each cell.
    pub fn density(&self) -> Vec<f64> {
        let v = self.cell_volume();
        self.weights.iter().map(|w| w / v).collect()
    }

    fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        let mut rest = flat;
        for (d, ax) in self.axes.iter().enumerate().rev() {
            idx[d] = rest % ax.cells;
            rest /= ax.cells;
        }
        idx
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, ax)| ax.center(i)).collect()
    }

    /// Cells with positive mass as a discrete measure.
    pub fn to_discrete(&self) -> Result<DiscreteMeasure> {
        let keep: Vec<usize> = (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect();
        let atoms = keep.iter().map(|&i| self.center(i)).collect();
        DiscreteMeasure::normalized(atoms, keep.iter().map(|&i| self.weights[i]).collect())
    }

    /// Concavity of the log-mass along every lattice line.
    ///
    /// Second differences over consecutive positive cells must be `<= tol`
    /// and the positive cells on a line must be contiguous.
    pub fn is_log_concave(&self, tol: f64) -> bool {
        let lines: Vec<Vec<usize>> = match self.axes.as_slice() {
            [a] => vec![(0..a.cells).collect()],
            [a, b] => {
                let rows = (0..a.cells).map(|i| (0..b.cells).map(|j| i * b.cells + j).collect());
                let cols = (0..b.cells).map(|j| (0..a.cells).map(|i| i * b.cells + j).collect());
                rows.chain(cols).collect()
            }
            _ => return false,
        };
        lines.iter().all(|line| {
            let pos: Vec<usize> = (0..line.len()).filter(|&k| self.weights[line[k]] > 0.0).collect();
            let contiguous = pos.last().zip(pos.first()).is_none_or(|(l, f)| l - f + 1 == pos.len());
            let logs: Vec<f64> = pos.iter().map(|&k| self.weights[line[k]].ln()).collect();
            contiguous && logs.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] <= tol)
        })
    }
}

/// Normalized cell-center discretization of `exp(log_density)` on a box.
///
/// `domain` holds one `(lo, hi)` interval per axis (one or two axes);
/// `resolution` is the number of cells per axis. `-inf` log-density is allowed
/// (zero mass); NaN and `+inf` are rejected.
pub fn discretize_density(
    log_density: impl Fn(&[f64]) -> f64,
    domain: &[(f64, f64)],
    resolution: usize,
) -> Result<GridMeasure> {
    if resolution < 8 {
        return Err(Error::Input(format!("resolution {resolution} below 8 cells per axis")));
    }
    let axes: Vec<GridAxis> =
        domain.iter().map(|&(lo, hi)| GridAxis { lo, hi, cells: resolution }).collect();
    let shell = GridMeasure { axes: axes.clone(), weights: Vec::new() };
    let cells: usize = axes.iter().map(|a| a.cells).product();
    let mut logs = Vec::with_capacity(cells);
    for c in 0..cells {
        let v = log_density(&shell.center(c));
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Input(format!("non-finite log-density {v} at cell {c}")));
        }
        logs.push(v);
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Input("density vanishes on the whole domain".into()));
    }
    let masses: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = masses.iter().sum();
    GridMeasure::from_weights(axes, masses.into_iter().map(|m| m / total).collect())
}
