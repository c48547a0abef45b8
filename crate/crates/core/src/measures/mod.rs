//! Probability measures: weighted atom clouds, the sampling catalog, grid
//! discretizations of 1D/2D densities, moments, and exact quadratic transport.

mod discrete;
mod family;
mod grid;
mod moments;
mod transport;

pub use discrete::DiscreteMeasure;
pub use family::{DistributionFamily, FamilyKind, Region, Sampler};
pub(crate) use family::fill_gaussian;
pub use grid::{discretize_density, GridAxis, GridMeasure};
pub use moments::{
    isotropize, measure_moments, sample_moments, MomentSummary, Tensor3, ThirdMomentAccumulator,
};
pub use transport::{
    solve_transport, t2_distance, t2_distance_with_limit, TransportPlan, EXACT_SUPPORT_LIMIT,
};

use std::io::Write;

use crate::error::{Error, Result};

/// Points stored row-major: `count` rows of `dim` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Input(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Input("points of mixed dimension".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Apply a map to each point, keeping the dimension.
    pub fn map_points(&self, f: impl Fn(&[f64], &mut [f64])) -> PointCloud {
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.data.chunks_exact(self.dim).zip(data.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        PointCloud { dim: self.dim, data }
    }

    /// CSV with header `x1,..,xn` and one point per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
