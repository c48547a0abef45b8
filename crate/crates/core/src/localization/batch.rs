use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{PathTrace, RunOptions, StopReason, StoppingRule};
use super::state::Localizer;
use crate::error::{Error, Result};
use crate::measures::{t2_distance_with_limit, DiscreteMeasure, PointCloud};
use crate::rng::RngStream;
use crate::stats::{chi_square_gof, Running};

/// What to aggregate over a batch of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub time_grid: Vec<f64>,
    /// Compute the exact `T₂(law(a_t), μ)` at every grid time.
    pub transport: bool,
    /// Cap on `|supp law(a_t)| · |supp μ|` for the transport problem.
    pub transport_cells: usize,
    pub run: RunOptions,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { time_grid: vec![0.5, 1.0, 2.0], transport: false, transport_cells: 1 << 22, run: RunOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalFrequencies {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub counts: Vec<usize>,
    /// Paths that had not collapsed when they stopped.
    pub uncollapsed: usize,
    pub chi_square: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub first_stream: u64,
    pub path_count: usize,
}

/// Cross-path statistics of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct AggregateReport {
    pub time_grid: Vec<f64>,
    pub mean_trA: Vec<f64>,
    pub se_trA: Vec<f64>,
    pub mean_opA: Vec<f64>,
    /// `E a_t`, one vector per grid time.
    pub mean_a: Vec<Vec<f64>>,
    pub se_a: Vec<Vec<f64>>,
    pub t2_to_mu: Option<Vec<f64>>,
    pub trace_a0: f64,
    pub terminal_frequencies: TerminalFrequencies,
    pub seeds: SeedInfo,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub traces: Vec<PathTrace>,
    pub report: AggregateReport,
}

impl Localizer {
    /// Run `path_count` independent paths; path `i` uses `stream.substream(i)`.
    pub fn run_paths(
        &self,
        rule: StoppingRule,
        dt: f64,
        path_count: usize,
        stream: RngStream,
        opts: &RunOptions,
    ) -> Result<Vec<PathTrace>> {
        if path_count == 0 {
            return Err(Error::Config("path count must be at least 1".into()));
        }
        rule.validate()?;
        (0..path_count as u64)
            .into_par_iter()
            .map(|i| self.run(self.init(), rule, dt, stream.substream(i), opts))
            .collect()
    }

    /// Simulate a batch and aggregate it on `opts.time_grid`.
    pub fn batch_run(
        &self,
        rule: StoppingRule,
        dt: f64,
        path_count: usize,
        stream: RngStream,
        opts: &BatchOptions,
    ) -> Result<BatchResult> {
        if opts.time_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("time grid must be finite and non-negative".into()));
        }
        let traces = self.run_paths(rule, dt, path_count, stream, &opts.run)?;
        let report = self.aggregate(&traces, stream, opts)?;
        Ok(BatchResult { traces, report })
    }

    pub fn aggregate(&self, traces: &[PathTrace], stream: RngStream, opts: &BatchOptions) -> Result<AggregateReport> {
        let n = self.dim();
        let mut mean_tr = Vec::new();
        let mut se_tr = Vec::new();
        let mut mean_op = Vec::new();
        let mut mean_a = Vec::new();
        let mut se_a = Vec::new();
        let mut t2 = opts.transport.then(Vec::new);
        for &t in &opts.time_grid {
            let recs: Vec<_> = traces.iter().map(|tr| tr.value_at(t)).collect();
            let tr: Running = recs.iter().map(|r| r.tr_a).collect();
            let op: Running = recs.iter().map(|r| r.op_a).collect();
            let coords: Vec<Running> = (0..n).map(|k| recs.iter().map(|r| r.a[k]).collect()).collect();
            mean_tr.push(tr.mean);
            se_tr.push(tr.std_error());
            mean_op.push(op.mean);
            mean_a.push(coords.iter().map(|c| c.mean).collect());
            se_a.push(coords.iter().map(|c| c.std_error()).collect());
            if let Some(t2) = t2.as_mut() {
                let rows: Vec<Vec<f64>> = recs.into_iter().map(|r| r.a).collect();
                let law = DiscreteMeasure::empirical(&PointCloud::from_rows(&rows)?)?;
                t2.push(t2_distance_with_limit(&law, self.measure(), opts.transport_cells)?);
            }
        }
        Ok(AggregateReport {
            time_grid: opts.time_grid.clone(),
            mean_trA: mean_tr,
            se_trA: se_tr,
            mean_opA: mean_op,
            mean_a,
            se_a,
            t2_to_mu: t2,
            trace_a0: self.trace_a0(),
            terminal_frequencies: self.terminal_frequencies(traces)?,
            seeds: SeedInfo { seed: stream.seed, first_stream: stream.substream(0).index, path_count: traces.len() },
        })
    }

    /// Collapse counts per atom, with a chi-square test against the initial weights
    /// when every path collapsed.
    pub fn terminal_frequencies(&self, traces: &[PathTrace]) -> Result<TerminalFrequencies> {
        let mu = self.measure();
        let mut counts = vec![0; mu.len()];
        let mut uncollapsed = 0;
        for tr in traces {
            match (tr.stop_reason, tr.terminal_atom) {
                (StopReason::Collapsed, Some(i)) => counts[i] += 1,
                _ => uncollapsed += 1,
            }
        }
        let (chi_square, p_value) = if uncollapsed == 0 && mu.len() > 1 {
            let (s, p) = chi_square_gof(&counts, mu.weights())?;
            (Some(s), Some(p))
        } else {
            (None, None)
        };
        Ok(TerminalFrequencies {
            atoms: (0..mu.len()).map(|i| mu.atom(i).to_vec()).collect(),
            weights: mu.weights().to_vec(),
            counts,
            uncollapsed,
            chi_square,
            p_value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_is_reproducible_and_ordered() {
        let loc = Localizer::new(&DiscreteMeasure::two_point(0.5).unwrap(), Default::default()).unwrap();
        let rule = StoppingRule::FixedHorizon { t_max: 0.2 };
        let opts = BatchOptions { time_grid: vec![0.1, 0.2], ..Default::default() };
        let a = loc.batch_run(rule, 1e-3, 8, RngStream::root(3), &opts).unwrap();
        let b = loc.batch_run(rule, 1e-3, 8, RngStream::root(3), &opts).unwrap();
        assert_eq!(a.report, b.report);
        for (i, tr) in a.traces.iter().enumerate() {
            assert_eq!(tr.stream_index, RngStream::root(3).substream(i as u64).index);
        }
        assert_eq!(a.report.terminal_frequencies.uncollapsed, 8);
        assert!(a.report.terminal_frequencies.p_value.is_none());
    }

    #[test]
    fn zero_paths_rejected() {
        let loc = Localizer::new(&DiscreteMeasure::two_point(0.5).unwrap(), Default::default()).unwrap();
        let r = loc.batch_run(StoppingRule::FixedHorizon { t_max: 1.0 }, 1e-3, 0, RngStream::root(0), &BatchOptions::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
