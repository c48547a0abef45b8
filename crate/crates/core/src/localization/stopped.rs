use serde::{Deserialize, Serialize};

use super::run::{PathTrace, RunOptions, StopReason, StoppingRule};
use super::state::Localizer;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{MeanEstimate, Running};

/// Where one stopped path ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedPath {
    /// `a_T - a_0`.
    pub increment: Vec<f64>,
    /// `∫₀ᵀ A_s ds`, row-major.
    pub qv: Vec<f64>,
    pub op_integral: f64,
    pub stop_time: f64,
    pub reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMeans {
    pub l1: MeanEstimate,
    pub l2: MeanEstimate,
    pub linf: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedReport {
    pub theta: f64,
    pub path_count: usize,
    /// Fraction of paths stopped by the threshold before the horizon.
    pub threshold_fraction: f64,
    pub collapse_fraction: f64,
    pub horizon_fraction: f64,
    pub stop_time: MeanEstimate,
    /// `E‖a_T - a_0‖` for the ℓ¹, ℓ², ℓ∞ norms.
    pub norms: NormMeans,
    /// Largest `λ_max(∫₀ᵀ A_s ds) - θ` over paths; non-positive up to roundoff.
    pub max_qv_excess: f64,
    pub seed: u64,
    #[serde(skip)]
    pub paths: Vec<StoppedPath>,
}

impl Localizer {
    /// Run paths until `∫‖A_s‖_op ds` reaches `theta` (or collapse, or the horizon).
    pub fn stopped_run(
        &self,
        theta: f64,
        dt: f64,
        path_count: usize,
        stream: RngStream,
        opts: &RunOptions,
    ) -> Result<StoppedReport> {
        if !(theta > 0.0) {
            return Err(Error::Config(format!("threshold must be positive, got {theta}")));
        }
        let traces = self.run_paths(StoppingRule::OpNormIntegral { theta }, dt, path_count, stream, opts)?;
        let a0 = self.init().mean;
        let paths: Vec<StoppedPath> = traces
            .iter()
            .map(|tr: &PathTrace| StoppedPath {
                increment: tr.terminal.a.iter().zip(a0.iter()).map(|(a, b)| a - b).collect(),
                qv: tr.final_qv.clone(),
                op_integral: tr.final_op_integral,
                stop_time: tr.stop_time,
                reason: tr.stop_reason,
            })
            .collect();
        let n = self.dim();
        let frac = |r: StopReason| paths.iter().filter(|p| p.reason == r).count() as f64 / path_count as f64;
        let mut l1 = Running::default();
        let mut l2 = Running::default();
        let mut linf = Running::default();
        let mut excess = f64::NEG_INFINITY;
        for p in &paths {
            l1.push(p.increment.iter().map(|v| v.abs()).sum());
            l2.push(p.increment.iter().map(|v| v * v).sum::<f64>().sqrt());
            linf.push(p.increment.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            let qv = nalgebra::DMatrix::from_row_slice(n, n, &p.qv);
            excess = excess.max(crate::linalg::max_eigenvalue(&qv) - theta);
        }
        Ok(StoppedReport {
            theta,
            path_count,
            threshold_fraction: frac(StopReason::Threshold),
            collapse_fraction: frac(StopReason::Collapsed),
            horizon_fraction: frac(StopReason::Horizon),
            stop_time: paths.iter().map(|p| p.stop_time).collect::<Running>().estimate(),
            norms: NormMeans { l1: l1.estimate(), l2: l2.estimate(), linf: linf.estimate() },
            max_qv_excess: excess,
            seed: stream.seed,
            paths,
        })
    }
}
