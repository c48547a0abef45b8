use serde::{Deserialize, Serialize};

use super::run::PathTrace;
use crate::error::{Error, Result};
use crate::stats::Running;

/// Fit of `log E‖A_t‖_op` against `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub slope: f64,
    pub intercept: f64,
    /// `sup_t e^t E‖A_t‖_op / ‖A_0‖_op` over the grid.
    pub empirical_constant: f64,
    pub times: Vec<f64>,
    pub mean_op: Vec<f64>,
    pub se_op: Vec<f64>,
    pub path_count: usize,
}

pub const MIN_DECAY_TRACES: usize = 100;

/// Decay fit over the records of `traces` up to `t_max` (all records when `None`).
///
/// Traces must share a record interval; stopped paths contribute their terminal state.
pub fn decay_diagnostic(traces: &[PathTrace], t_max: Option<f64>) -> Result<DecayReport> {
    if traces.len() < MIN_DECAY_TRACES {
        return Err(Error::Input(format!(
            "decay fit needs at least {MIN_DECAY_TRACES} traces, got {}",
            traces.len()
        )));
    }
    let step = traces[0].record_interval;
    if traces.iter().any(|t| (t.record_interval - step).abs() > 1e-12 * step) {
        return Err(Error::Input("traces do not share a record interval".into()));
    }
    let t0 = traces[0].times.first().copied().unwrap_or(0.0);
    let end = traces
        .iter()
        .map(|t| t.times.last().copied().unwrap_or(t0).max(t.stop_time))
        .fold(t0, f64::max);
    let end = t_max.map_or(end, |m| m.min(end));
    let count = ((end - t0) / step + 1e-9).floor() as usize + 1;
    if count < 2 {
        return Err(Error::Input("decay grid has fewer than two times".into()));
    }
    let times: Vec<f64> = (0..count).map(|k| t0 + k as f64 * step).collect();
    let mut mean_op = Vec::with_capacity(count);
    let mut se_op = Vec::with_capacity(count);
    for &t in &times {
        let r: Running = traces.iter().map(|tr| tr.value_at(t).op_a).collect();
        mean_op.push(r.mean);
        se_op.push(r.std_error());
    }
    let op0 = mean_op[0];
    if !(op0 > 0.0) {
        return Err(Error::Input("initial covariance is zero".into()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&mean_op)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&t, &m)| (t - t0, m.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Input("decay grid has fewer than two positive means".into()));
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let empirical_constant = times
        .iter()
        .zip(&mean_op)
        .map(|(t, m)| (t - t0).exp() * m / op0)
        .fold(0.0, f64::max);
    Ok(DecayReport {
        slope,
        intercept: my - slope * mx,
        empirical_constant,
        times,
        mean_op,
        se_op,
        path_count: traces.len(),
    })
}
