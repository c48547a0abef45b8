use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::state::{LocalizationState, Localizer};
use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

/// When a path stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum StoppingRule {
    /// Run to `t_max` (or collapse).
    FixedHorizon { t_max: f64 },
    /// Stop once `∫₀ᵗ ‖A_s‖_op ds` reaches `theta`; `theta = inf` runs to collapse.
    OpNormIntegral { theta: f64 },
    /// Run until the heaviest atom carries more than `1 - eps`.
    Collapse { eps: f64 },
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StoppingRule::FixedHorizon { t_max } => t_max >= 0.0 && t_max.is_finite(),
            StoppingRule::OpNormIntegral { theta } => theta > 0.0,
            StoppingRule::Collapse { eps } => eps > 0.0 && eps < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid stopping rule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Collapsed,
    Threshold,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Time cap for threshold and collapse rules (`e^{-12}` residual covariance).
    pub horizon: f64,
    /// Spacing of trace records, rounded to a whole number of steps.
    pub record_interval: f64,
    /// Budget of accepted (sub)steps per path.
    pub max_substeps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { horizon: 12.0, record_interval: 0.05, max_substeps: 20_000_000 }
    }
}

/// One sampled point of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub a: Vec<f64>,
    pub tr_a: f64,
    pub op_a: f64,
    pub tr_qv: f64,
}

/// Time series of one localization path, recorded on a regular grid, plus
/// the state at the stopping time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub dim: usize,
    pub stream_index: u64,
    pub record_interval: f64,
    pub times: Vec<f64>,
    /// Row-major, `dim` entries per record.
    pub a: Vec<f64>,
    pub tr_a: Vec<f64>,
    pub op_a: Vec<f64>,
    pub tr_qv: Vec<f64>,
    /// State at the stopping time (may fall between grid points).
    pub terminal: TraceRecord,
    /// `∫ A_s ds` at the stopping time, row-major.
    pub final_qv: Vec<f64>,
    pub final_op_integral: f64,
    pub stop_reason: StopReason,
    pub stop_time: f64,
    /// Heaviest atom, when the path collapsed.
    pub terminal_atom: Option<usize>,
    pub substeps: usize,
    pub halvings: usize,
    pub floor_warnings: usize,
}

impl PathTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn record(&self, i: usize) -> TraceRecord {
        TraceRecord {
            t: self.times[i],
            a: self.a[i * self.dim..(i + 1) * self.dim].to_vec(),
            tr_a: self.tr_a[i],
            op_a: self.op_a[i],
            tr_qv: self.tr_qv[i],
        }
    }

    /// State at time `t`, carrying the terminal state forward after the path stopped.
    pub fn value_at(&self, t: f64) -> TraceRecord {
        let eps = 1e-9 * self.record_interval.max(1e-300);
        if self.terminal.t <= t + eps {
            return self.terminal.clone();
        }
        let idx = self.times.partition_point(|&s| s <= t + eps);
        self.record(idx.saturating_sub(1))
    }

    /// CSV with columns `t, a_1..a_n, trA, opA, trQV`; the terminal state is
    /// appended when it falls after the last grid record.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let a_cols: Vec<String> = (1..=self.dim).map(|i| format!("a_{i}")).collect();
        writeln!(w, "t,{},trA,opA,trQV", a_cols.join(","))?;
        let mut row = |r: &TraceRecord| -> std::io::Result<()> {
            let a: Vec<String> = r.a.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{:e},{},{:e},{:e},{:e}", r.t, a.join(","), r.tr_a, r.op_a, r.tr_qv)
        };
        for i in 0..self.len() {
            row(&self.record(i))?;
        }
        if self.times.last().is_none_or(|&t| self.terminal.t > t) {
            row(&self.terminal)?;
        }
        Ok(())
    }
}

fn snapshot(st: &LocalizationState) -> TraceRecord {
    let op = if st.cov.nrows() == 1 {
        st.cov[(0, 0)].abs()
    } else {
        crate::linalg::op_norm_sym(&st.cov)
    };
    TraceRecord {
        t: st.t,
        a: st.mean.iter().copied().collect(),
        tr_a: st.cov.trace(),
        op_a: op,
        tr_qv: st.qv_accum.trace(),
    }
}

/// Split a Brownian increment over `[0, h]` at `h1` (exact bridge draw).
fn bridge_split(dw: &[f64], h: f64, h1: f64, rng: &mut StreamRng) -> (Vec<f64>, Vec<f64>) {
    let sd = (h1 * (h - h1) / h).max(0.0).sqrt();
    let first: Vec<f64> = dw
        .iter()
        .map(|&w| {
            let z: f64 = StandardNormal.sample(rng);
            w * h1 / h + sd * z
        })
        .collect();
    let second = dw.iter().zip(&first).map(|(w, f)| w - f).collect();
    (first, second)
}

struct RunCtx<'a> {
    rule: StoppingRule,
    weight_tol: f64,
    rng: &'a mut StreamRng,
    substeps: usize,
    halvings: usize,
    budget: usize,
    exhausted: bool,
}

impl RunCtx<'_> {
    fn threshold(&self) -> Option<f64> {
        match self.rule {
            StoppingRule::OpNormIntegral { theta } if theta.is_finite() => Some(theta),
            _ => None,
        }
    }

    fn reached(&self, st: &LocalizationState) -> bool {
        self.threshold().is_some_and(|theta| st.op_integral >= theta * (1.0 - 1e-12))
    }
}

impl Localizer {
    /// Simulate one path from `state` until `rule` fires, the measure collapses,
    /// or the horizon is reached.
    ///
    /// Steps of size `dt` are halved (with Brownian-bridge refinement of the
    /// increment) whenever a log-weight of a non-negligible atom would move by
    /// more than `max_log_change`. Threshold rules end with a partial step so that
    /// `∫‖A_s‖ ds` lands on `theta`, which keeps `∫A_s ds ⪯ theta·id`.
    pub fn run(
        &self,
        state: LocalizationState,
        rule: StoppingRule,
        dt: f64,
        stream: RngStream,
        opts: &RunOptions,
    ) -> Result<PathTrace> {
        rule.validate()?;
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(Error::Config(format!("step size {dt} outside (0, 0.1]")));
        }
        let n = self.dim();
        let horizon = match rule {
            StoppingRule::FixedHorizon { t_max } => state.t + t_max,
            _ => state.t + opts.horizon,
        };
        let weight_tol = match rule {
            StoppingRule::Collapse { eps } => eps,
            _ => self.config().collapse_weight,
        };
        let stride = ((opts.record_interval / dt).round() as usize).max(1);
        let mut rng = stream.rng();
        let mut ctx = RunCtx {
            rule,
            weight_tol,
            rng: &mut rng,
            substeps: 0,
            halvings: 0,
            budget: opts.max_substeps,
            exhausted: false,
        };
        let mut st = state;
        st.collapsed = st.collapsed || self.is_collapsed(&st, weight_tol);
        let mut trace = PathTrace {
            dim: n,
            stream_index: stream.index,
            record_interval: stride as f64 * dt,
            times: Vec::new(),
            a: Vec::new(),
            tr_a: Vec::new(),
            op_a: Vec::new(),
            tr_qv: Vec::new(),
            terminal: snapshot(&st),
            final_qv: Vec::new(),
            final_op_integral: 0.0,
            stop_reason: StopReason::Horizon,
            stop_time: st.t,
            terminal_atom: None,
            substeps: 0,
            halvings: 0,
            floor_warnings: 0,
        };
        let push = |trace: &mut PathTrace, st: &LocalizationState| {
            let r = snapshot(st);
            trace.times.push(r.t);
            trace.a.extend_from_slice(&r.a);
            trace.tr_a.push(r.tr_a);
            trace.op_a.push(r.op_a);
            trace.tr_qv.push(r.tr_qv);
        };
        push(&mut trace, &st);

        let t0 = st.t;
        let mut k: u64 = 0;
        let time_eps = 1e-12 * horizon.abs().max(1.0);
        let reason = loop {
            if st.collapsed {
                break StopReason::Collapsed;
            }
            if ctx.reached(&st) {
                break StopReason::Threshold;
            }
            if st.t >= horizon - time_eps {
                break StopReason::Horizon;
            }
            let h = dt.min(horizon - st.t);
            let dw: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut *ctx.rng);
                    h.sqrt() * z
                })
                .collect();
            let before = st.t;
            self.advance(&mut st, h, dw, 0, &mut ctx)?;
            if ctx.exhausted {
                trace.stop_time = st.t;
                trace.terminal = snapshot(&st);
                return Err(Error::Truncated { budget: ctx.budget, trace: Box::new(trace) });
            }
            let full = h == dt && (st.t - before - dt).abs() <= 1e-9 * dt;
            if full {
                k += 1;
                st.t = t0 + k as f64 * dt;
                if k % stride as u64 == 0 {
                    push(&mut trace, &st);
                }
            } else if !st.collapsed && !ctx.reached(&st) && st.t < horizon - time_eps {
                // clamped by the threshold but not yet there after halving; keep going
                continue;
            }
        };
        trace.stop_reason = reason;
        trace.stop_time = st.t;
        trace.terminal = snapshot(&st);
        trace.final_qv = st.qv_accum.transpose().iter().copied().collect();
        trace.final_op_integral = st.op_integral;
        trace.terminal_atom = (reason == StopReason::Collapsed).then(|| st.heaviest_atom());
        trace.substeps = ctx.substeps;
        trace.halvings = ctx.halvings;
        trace.floor_warnings = st.floor_warnings;
        Ok(trace)
    }

    fn advance(
        &self,
        st: &mut LocalizationState,
        h: f64,
        dw: Vec<f64>,
        depth: u32,
        ctx: &mut RunCtx<'_>,
    ) -> Result<()> {
        if let Some(theta) = ctx.threshold() {
            let op = crate::linalg::op_norm_sym(&st.cov);
            let room = theta - st.op_integral;
            if op * h > room * (1.0 + 1e-12) {
                let h1 = room / op;
                if h1 <= 0.0 {
                    st.op_integral = st.op_integral.max(theta);
                    return Ok(());
                }
                let (dw1, _) = bridge_split(&dw, h, h1, ctx.rng);
                return self.advance(st, h1, dw1, depth, ctx);
            }
        }
        let proposal = self.propose(st, h, &dw)?;
        if proposal.max_change > self.config().max_log_change && depth < self.config().max_halvings {
            ctx.halvings += 1;
            let (dw1, dw2) = bridge_split(&dw, h, h / 2.0, ctx.rng);
            self.advance(st, h / 2.0, dw1, depth + 1, ctx)?;
            if st.collapsed || ctx.reached(st) || ctx.exhausted {
                return Ok(());
            }
            return self.advance(st, h / 2.0, dw2, depth + 1, ctx);
        }
        let mut next = proposal.state;
        next.collapsed = self.is_collapsed(&next, ctx.weight_tol);
        *st = next;
        ctx.substeps += 1;
        if ctx.substeps > ctx.budget {
            ctx.exhausted = true;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    fn two_point(p: f64) -> Localizer {
        Localizer::new(&DiscreteMeasure::two_point(p).unwrap(), Default::default()).unwrap()
    }

    #[test]
    fn zero_horizon_gives_single_record() {
        let loc = two_point(0.5);
        let tr = loc
            .run(loc.init(), StoppingRule::FixedHorizon { t_max: 0.0 }, 1e-3, RngStream::root(1), &RunOptions::default())
            .unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.record(0).tr_a, 1.0);
        assert_eq!(tr.stop_reason, StopReason::Horizon);
    }

    #[test]
    fn infinite_threshold_runs_to_collapse_on_an_atom() {
        let loc = two_point(0.3);
        let tr = loc
            .run(loc.init(), StoppingRule::OpNormIntegral { theta: f64::INFINITY }, 1e-3, RngStream::root(4), &RunOptions::default())
            .unwrap();
        assert_eq!(tr.stop_reason, StopReason::Collapsed);
        let atom = tr.terminal_atom.unwrap();
        let x = loc.measure().atom(atom)[0];
        assert!((tr.terminal.a[0] - x).abs() < 1e-4);
    }

    #[test]
    fn threshold_lands_exactly() {
        let loc = two_point(0.5);
        let tr = loc
            .run(loc.init(), StoppingRule::OpNormIntegral { theta: 0.25 }, 1e-3, RngStream::root(9), &RunOptions::default())
            .unwrap();
        if tr.stop_reason == StopReason::Threshold {
            assert!((tr.final_op_integral - 0.25).abs() < 1e-12);
            assert!(tr.final_qv[0] <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn records_are_increasing_and_bounded() {
        let loc = two_point(0.5);
        let tr = loc
            .run(loc.init(), StoppingRule::FixedHorizon { t_max: 1.0 }, 1e-3, RngStream::root(2), &RunOptions::default())
            .unwrap();
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!((0..tr.len()).all(|i| tr.op_a[i] <= tr.tr_a[i] + 1e-15));
    }

    #[test]
    fn budget_exhaustion_carries_trace() {
        let loc = two_point(0.5);
        let opts = RunOptions { max_substeps: 10, ..Default::default() };
        match loc.run(loc.init(), StoppingRule::FixedHorizon { t_max: 1.0 }, 1e-3, RngStream::root(2), &opts) {
            Err(Error::Truncated { trace, .. }) => assert!(trace.stop_time > 0.0),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn csv_header() {
        let loc = two_point(0.5);
        let tr = loc
            .run(loc.init(), StoppingRule::FixedHorizon { t_max: 0.1 }, 1e-3, RngStream::root(2), &RunOptions::default())
            .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,a_1,trA,opA,trQV\n"));
        assert_eq!(text.lines().count(), 1 + tr.len());
    }
}
