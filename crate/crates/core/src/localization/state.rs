use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::floored_inverse;
use crate::measures::{measure_moments, DiscreteMeasure, GridMeasure};

/// Numerical knobs of the exponential Euler scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationConfig {
    /// Covariance eigenvalues at or below this are treated as collapsed directions.
    pub eigen_floor: f64,
    /// Collapse once the heaviest atom carries more than `1 - collapse_weight`.
    pub collapse_weight: f64,
    /// ... or once `tr A_t < collapse_trace_ratio * tr A_0`.
    pub collapse_trace_ratio: f64,
    /// A step is halved when a normalized log-weight moves by more than this.
    pub max_log_change: f64,
    /// Only atoms at least this heavy take part in the step-size test.
    pub change_mass_floor: f64,
    pub max_halvings: u32,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            eigen_floor: 1e-10,
            collapse_weight: 1e-6,
            collapse_trace_ratio: 1e-8,
            max_log_change: 1.0,
            change_mass_floor: 1e-6,
            max_halvings: 12,
        }
    }
}

/// Snapshot of the localization process.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationState {
    pub t: f64,
    /// Normalized: `Σ exp(log_weights) = 1`.
    pub log_weights: Vec<f64>,
    /// Barycenter `a_t`.
    pub mean: DVector<f64>,
    /// Covariance `A_t`.
    pub cov: DMatrix<f64>,
    /// `∫ A_s⁻¹ ds` (pseudo-inverse on the live subspace).
    pub b_accum: DMatrix<f64>,
    /// `∫ A_s ds`, the quadratic variation of the barycenter.
    pub qv_accum: DMatrix<f64>,
    /// `∫ ‖A_s‖_op ds`.
    pub op_integral: f64,
    pub collapsed: bool,
    /// Steps where a live covariance direction fell below the eigenvalue floor.
    pub floor_warnings: usize,
}

impl LocalizationState {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn heaviest_atom(&self) -> usize {
        (0..self.log_weights.len())
            .max_by(|&a, &b| self.log_weights[a].total_cmp(&self.log_weights[b]))
            .unwrap_or(0)
    }
}

/// Result of a tentative step.
pub(crate) struct Proposal {
    pub state: LocalizationState,
    pub max_change: f64,
}

/// Drives the measure-valued SDE `df_t(x) = f_t(x) <A_t^{-1/2}(x - a_t), dW_t>`
/// on the atoms of a discrete measure.
#[derive(Debug, Clone)]
pub struct Localizer {
    measure: Arc<DiscreteMeasure>,
    config: LocalizationConfig,
    tr_a0: f64,
}

impl Localizer {
    /// Zero-mass atoms are dropped; they stay at zero forever.
    pub fn new(measure: &DiscreteMeasure, config: LocalizationConfig) -> Result<Self> {
        let measure = measure.support();
        let tr_a0 = measure_moments(&measure, 2)?.covariance.trace();
        Ok(Self { measure: Arc::new(measure), config, tr_a0 })
    }

    pub fn from_grid(grid: &GridMeasure, config: LocalizationConfig) -> Result<Self> {
        Self::new(&grid.to_discrete()?, config)
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn config(&self) -> &LocalizationConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn trace_a0(&self) -> f64 {
        self.tr_a0
    }

    /// `t = 0` state; a single atom starts out collapsed.
    pub fn init(&self) -> LocalizationState {
        let n = self.dim();
        let log_weights: Vec<f64> = self.measure.weights().iter().map(|w| w.ln()).collect();
        let mut st = LocalizationState {
            t: 0.0,
            log_weights,
            mean: DVector::zeros(n),
            cov: DMatrix::zeros(n, n),
            b_accum: DMatrix::zeros(n, n),
            qv_accum: DMatrix::zeros(n, n),
            op_integral: 0.0,
            collapsed: false,
            floor_warnings: 0,
        };
        let w = st.weights();
        let (mean, cov) = self.weighted_moments(&w);
        st.mean = mean;
        st.cov = cov;
        st.collapsed = self.is_collapsed(&st, self.config.collapse_weight);
        st
    }

    pub(crate) fn is_collapsed(&self, st: &LocalizationState, weight_tol: f64) -> bool {
        self.measure.len() == 1
            || st.log_weights[st.heaviest_atom()].exp() > 1.0 - weight_tol
            || st.cov.trace() < self.config.collapse_trace_ratio * self.tr_a0
    }

    pub(crate) fn weighted_moments(&self, w: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let atoms = self.measure.atoms_flat();
        let mut mean = vec![0.0; n];
        for (x, &wi) in atoms.chunks_exact(n).zip(w) {
            for (m, xi) in mean.iter_mut().zip(x) {
                *m += wi * xi;
            }
        }
        let mut cov = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for (x, &wi) in atoms.chunks_exact(n).zip(w) {
            if wi == 0.0 {
                continue;
            }
            for r in 0..n {
                d[r] = x[r] - mean[r];
            }
            for r in 0..n {
                let wd = wi * d[r];
                for c in r..n {
                    cov[r * n + c] += wd * d[c];
                }
            }
        }
        for r in 0..n {
            for c in 0..r {
                cov[r * n + c] = cov[c * n + r];
            }
        }
        (DVector::from_vec(mean), DMatrix::from_row_slice(n, n, &cov))
    }

    /// One exponential Euler step of length `dt` driven by the increment `dw`.
    ///
    /// Each log-weight moves by `<A^{-1/2}(x - a), dW> - |A^{-1/2}(x - a)|² dt / 2`
    /// and the weights are renormalized. Collapsed states are returned unchanged.
    pub fn step(&self, st: &LocalizationState, dt: f64, dw: &[f64]) -> Result<LocalizationState> {
        if st.collapsed {
            return Ok(st.clone());
        }
        Ok(self.propose(st, dt, dw)?.state)
    }

    pub(crate) fn propose(&self, st: &LocalizationState, dt: f64, dw: &[f64]) -> Result<Proposal> {
        let n = self.dim();
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(Error::Input(format!("step size {dt} outside (0, 0.1]")));
        }
        if dw.len() != n || dw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("Brownian increment must be a finite vector of the state dimension".into()));
        }
        let inv = floored_inverse(&st.cov, self.config.eigen_floor);
        // row-major copy for the atom loop
        let s: Vec<f64> = (0..n * n).map(|k| inv.inv_sqrt[(k / n, k % n)]).collect();
        let atoms = self.measure.atoms_flat();
        let mut next = Vec::with_capacity(st.log_weights.len());
        let mut d = vec![0.0; n];
        for (x, &l) in atoms.chunks_exact(n).zip(&st.log_weights) {
            for r in 0..n {
                d[r] = x[r] - st.mean[r];
            }
            let mut lin = 0.0;
            let mut quad = 0.0;
            for r in 0..n {
                let row = &s[r * n..(r + 1) * n];
                let y: f64 = row.iter().zip(&d).map(|(a, b)| a * b).sum();
                lin += y * dw[r];
                quad += y * y;
            }
            next.push(l + lin - 0.5 * quad * dt);
        }
        let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = top + next.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        let mut max_change = 0.0_f64;
        for (new, &old) in next.iter_mut().zip(&st.log_weights) {
            *new -= shift;
            if old.exp() >= self.config.change_mass_floor {
                max_change = max_change.max((*new - old).abs());
            }
        }
        let w: Vec<f64> = next.iter().map(|l| l.exp()).collect();
        let (mean, cov) = self.weighted_moments(&w);
        let mut state = LocalizationState {
            t: st.t + dt,
            log_weights: next,
            mean,
            cov,
            b_accum: &st.b_accum + inv.pinv * dt,
            qv_accum: &st.qv_accum + &st.cov * dt,
            op_integral: st.op_integral + inv.max_eigenvalue.max(0.0) * dt,
            collapsed: false,
            floor_warnings: st.floor_warnings + usize::from(inv.dropped > 0),
        };
        state.collapsed = self.is_collapsed(&state, self.config.collapse_weight);
        Ok(Proposal { state, max_change })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point() -> Localizer {
        Localizer::new(&DiscreteMeasure::two_point(0.5).unwrap(), LocalizationConfig::default()).unwrap()
    }

    #[test]
    fn init_two_point() {
        let st = two_point().init();
        assert_eq!(st.mean[0], 0.0);
        assert_eq!(st.cov[(0, 0)], 1.0);
        assert!(!st.collapsed);
    }

    #[test]
    fn single_atom_is_collapsed_and_frozen() {
        let loc = Localizer::new(&DiscreteMeasure::dirac(vec![1.0, 2.0]).unwrap(), Default::default()).unwrap();
        let st = loc.init();
        assert!(st.collapsed);
        assert_eq!(loc.step(&st, 0.01, &[0.3, -0.1]).unwrap(), st);
    }

    #[test]
    fn zero_increment_keeps_symmetric_two_point() {
        let loc = two_point();
        let st = loc.step(&loc.init(), 0.01, &[0.0]).unwrap();
        assert_relative_eq!(st.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_point_weight_moves_like_bernoulli_diffusion() {
        // dp = sqrt(p(1-p)) dW: from p = 1/2, dW = 0.1 gives p ≈ 0.55
        let loc = two_point();
        let st = loc.step(&loc.init(), 0.01, &[0.1]).unwrap();
        let p = st.weights()[1];
        // brute-force oracle: many tiny steps of the reduced 1D diffusion with the same total increment
        let mut q: f64 = 0.5;
        let k = 100_000;
        for _ in 0..k {
            q += (q * (1.0 - q)).sqrt() * 0.1 / k as f64;
        }
        assert!((p - 0.55).abs() < 0.01, "{p}");
        assert!((p - q).abs() < 0.01, "{p} vs {q}");
    }

    #[test]
    fn rejects_bad_increments() {
        let loc = two_point();
        let st = loc.init();
        assert!(loc.step(&st, 0.5, &[0.0]).is_err());
        assert!(loc.step(&st, 0.01, &[f64::NAN]).is_err());
        assert!(loc.step(&st, 0.01, &[0.0, 1.0]).is_err());
    }
}
