use nalgebra::{DMatrix, DVector};

use super::{DiscreteMeasure, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, spectral_map};

/// Full `n x n x n` array of third moments `E X_i X_j X_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.dim;
        self.data[(i * n + j) * n + k] = v;
    }

    /// Largest deviation between permuted entries.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [self.get(i, k, j), self.get(j, i, k), self.get(k, j, i)] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// `M[k][l] = Σ_{i,j} T[i][j][k] T[i][j][l]`, symmetric PSD by construction.
    pub fn pair_contraction(&self) -> DMatrix<f64> {
        let n = self.dim;
        // rows indexed by (i, j), columns by k
        let flat = DMatrix::from_row_slice(n * n, n, &self.data);
        flat.transpose() * flat
    }

    /// `Σ_{i,j} (Σ_k T[i][j][k] θ_k)^2`.
    pub fn directional_frobenius_sq(&self, theta: &[f64]) -> f64 {
        let n = self.dim;
        let mut total = 0.0;
        for ij in 0..n * n {
            let row = &self.data[ij * n..(ij + 1) * n];
            let s: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
            total += s * s;
        }
        total
    }
}

/// Streaming accumulator for raw third moments over the index simplex
/// `i <= j <= k`.
#[derive(Debug, Clone)]
pub struct ThirdMomentAccumulator {
    dim: usize,
    offsets: Vec<usize>,
    packed: Vec<f64>,
    count: usize,
}

impl ThirdMomentAccumulator {
    pub fn new(dim: usize) -> Self {
        let mut offsets = vec![usize::MAX; dim * dim];
        let mut next = 0;
        for i in 0..dim {
            for j in i..dim {
                offsets[i * dim + j] = next;
                next += dim - j;
            }
        }
        Self { dim, offsets, packed: vec![0.0; next], count: 0 }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.push_weighted(x, 1.0);
        self.count += 1;
    }

    /// Add `w * x⊗x⊗x` without counting a sample.
    pub fn push_weighted(&mut self, x: &[f64], w: f64) {
        let n = self.dim;
        for i in 0..n {
            let xi = x[i];
            for j in i..n {
                let xij = w * xi * x[j];
                let off = self.offsets[i * n + j];
                let dst = &mut self.packed[off..off + (n - j)];
                for (d, xk) in dst.iter_mut().zip(&x[j..]) {
                    *d += xij * xk;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.packed.iter_mut().zip(&other.packed) {
            *a += b;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Averaged, fully symmetrized tensor.
    pub fn finish(&self) -> Tensor3 {
        self.expand(1.0 / self.count.max(1) as f64)
    }

    /// Symmetrized tensor of the raw weighted sums.
    pub fn finish_sum(&self) -> Tensor3 {
        self.expand(1.0)
    }

    fn expand(&self, scale: f64) -> Tensor3 {
        let n = self.dim;
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in i..n {
                let off = self.offsets[i * n + j];
                for k in j..n {
                    let v = self.packed[off + k - j] * scale;
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        t.set(a, b, c, v);
                    }
                }
            }
        }
        t
    }
}

/// Mean, covariance and (optionally) the raw third-moment tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub third: Option<Tensor3>,
}

fn check_order(order: usize) -> Result<()> {
    if order == 2 || order == 3 {
        Ok(())
    } else {
        Err(Error::Input(format!("moment order must be 2 or 3, got {order}")))
    }
}

/// Exact weighted moments of a discrete measure.
pub fn measure_moments(m: &DiscreteMeasure, order: usize) -> Result<MomentSummary> {
    check_order(order)?;
    let n = m.dim();
    let mut mean = DVector::zeros(n);
    for (x, w) in m.iter() {
        for (acc, xi) in mean.iter_mut().zip(x) {
            *acc += w * xi;
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    let mut third = (order == 3).then(|| ThirdMomentAccumulator::new(n));
    let mut d = vec![0.0; n];
    for (x, w) in m.iter() {
        for i in 0..n {
            d[i] = x[i] - mean[i];
        }
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += w * d[i] * d[j];
            }
        }
        if let Some(acc) = &mut third {
            acc.push_weighted(x, w);
        }
    }
    Ok(MomentSummary { mean, covariance: cov, third: third.map(|a| a.finish_sum()) })
}

/// Sample mean, unbiased sample covariance and raw third moments.
pub fn sample_moments(points: &PointCloud, order: usize) -> Result<MomentSummary> {
    check_order(order)?;
    let count = points.len();
    if count < 2 {
        return Err(Error::Input("sample moments need at least 2 points".into()));
    }
    let n = points.dim();
    let mut mean = DVector::zeros(n);
    for p in points.iter() {
        for (acc, v) in mean.iter_mut().zip(p) {
            *acc += v;
        }
    }
    mean /= count as f64;
    let mut cov = DMatrix::zeros(n, n);
    let mut third = (order == 3).then(|| ThirdMomentAccumulator::new(n));
    let mut d = vec![0.0; n];
    for p in points.iter() {
        for i in 0..n {
            d[i] = p[i] - mean[i];
        }
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] += d[i] * d[j];
            }
        }
        if let Some(acc) = &mut third {
            acc.push(p);
        }
    }
    for i in 0..n {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov /= (count - 1) as f64;
    Ok(MomentSummary { mean, covariance: cov, third: third.map(|a| a.finish()) })
}

/// Affine image with mean zero and identity covariance.
pub fn isotropize(m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let s = measure_moments(m, 2)?;
    let lam = min_eigenvalue(&s.covariance);
    if lam <= 1e-10 {
        return Err(Error::Degenerate(format!(
            "covariance smallest eigenvalue {lam:e} is not above 1e-10"
        )));
    }
    let whiten = spectral_map(&s.covariance, |l| l.max(1e-10).sqrt().recip());
    m.map_atoms(|x| {
        let d = DVector::from_column_slice(x) - &s.mean;
        (&whiten * d).iter().copied().collect()
    })
}
