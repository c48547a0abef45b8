//! Small dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix, with a closed form for 1x1.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    if m.nrows() == 1 {
        return (DVector::from_element(1, m[(0, 0)]), DMatrix::identity(1, 1));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Σ f(λ) v vᵀ over the spectrum of `m`.
pub fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let w = f(lam);
        if w == 0.0 {
            continue;
        }
        let v = vecs.column(k);
        out.ger(w, &v, &v, 1.0);
    }
    out
}

/// Floored inverse square root and pseudo-inverse of a PSD matrix.
#[derive(Debug, Clone)]
pub struct FlooredInverse {
    pub inv_sqrt: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    /// Directions with eigenvalue `<= floor`, dropped from both inverses.
    pub dropped: usize,
    pub max_eigenvalue: f64,
}

pub fn floored_inverse(m: &DMatrix<f64>, floor: f64) -> FlooredInverse {
    let n = m.nrows();
    let (vals, vecs) = sym_eigen(m);
    let mut inv_sqrt = DMatrix::zeros(n, n);
    let mut pinv = DMatrix::zeros(n, n);
    let mut dropped = 0;
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= floor {
            dropped += 1;
            continue;
        }
        let v = vecs.column(k);
        inv_sqrt.ger(lam.sqrt().recip(), &v, &v, 1.0);
        pinv.ger(lam.recip(), &v, &v, 1.0);
    }
    FlooredInverse { inv_sqrt, pinv, dropped, max_eigenvalue: vals.max() }
}

/// Square root of a PSD matrix; eigenvalues in `[-clamp, 0)` are treated as zero.
pub fn psd_sqrt(m: &DMatrix<f64>, clamp: f64) -> Result<DMatrix<f64>> {
    let (vals, _) = sym_eigen(m);
    if let Some(bad) = vals.iter().find(|&&l| l < -clamp) {
        return Err(Error::Invariant(format!(
            "matrix is not PSD: eigenvalue {bad:e} below -{clamp:e}"
        )));
    }
    Ok(spectral_map(m, |l| l.max(0.0).sqrt()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0.min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0.max()
}

/// Operator norm of a symmetric matrix.
pub fn op_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    sym_eigen(m).0.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()))
}

#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub eigenvalue: f64,
    pub eigenvector: DVector<f64>,
    pub iterations: usize,
}

/// Top eigenpair of a symmetric PSD matrix by power iteration.
///
/// Starts from the basis vector of the largest diagonal entry and stops when the
/// Rayleigh quotient changes by less than `tol` (relative).
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<PowerIteration> {
    let n = m.nrows();
    let start = (0..n)
        .max_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)]))
        .ok_or_else(|| Error::Input("empty matrix".into()))?;
    let mut v = DVector::zeros(n);
    v[start] = 1.0;
    let mut lambda = m[(start, start)];
    for it in 1..=max_iter {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(PowerIteration { eigenvalue: 0.0, eigenvector: v, iterations: it });
        }
        v = w / norm;
        let next = v.dot(&(m * &v));
        if (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(PowerIteration { eigenvalue: next, eigenvector: v, iterations: it });
        }
        lambda = next;
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {max_iter} iterations"
    )))
}
