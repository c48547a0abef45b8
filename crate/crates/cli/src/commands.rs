use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};
use stoloc_core::constants::{catalog_tau, estimate_sigma, estimate_tau, MIN_TAU_SAMPLES};
use stoloc_core::coupling::{
    convex_dominance_check, gaussian_conformance, maurey_sample, ConvexFunctional, MartingaleEndpoint,
    MIN_CONFORMANCE_SAMPLES,
};
use stoloc_core::geometry::{
    compare_norms_experiment, corollary_checks, isotropic_constant, width_report, CompareReport,
};
use stoloc_core::localization::{
    decay_diagnostic, BatchOptions, Localizer, RunOptions, StopReason, StoppingRule, MIN_DECAY_TRACES,
};
use stoloc_core::linalg::max_eigenvalue;
use stoloc_core::stats::chi_variance;
use stoloc_core::{BodySpec, DistributionFamily, NormSpec, Result, RngStream};

use crate::config::{Rule, RunConfig};
use crate::presets;

/// What a subcommand produced: the JSON `result` and its CSV rendering.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub csv: String,
    /// False only for a failed invariant suite.
    pub pass: bool,
}

impl Outcome {
    fn new(result: impl Serialize, csv: String) -> Result<Self> {
        let result = serde_json::to_value(result).map_err(|e| stoloc_core::Error::Numerical(e.to_string()))?;
        Ok(Self { result, csv, pass: true })
    }
}

/// Time grid of a localization report: quarters of the horizon.
pub fn time_grid(t_max: f64) -> Vec<f64> {
    (1..=4).map(|k| k as f64 * t_max / 4.0).collect()
}

fn stopping_rule(cfg: &RunConfig) -> StoppingRule {
    match cfg.rule {
        Rule::Fixed => StoppingRule::FixedHorizon { t_max: cfg.t_max },
        Rule::Threshold => StoppingRule::OpNormIntegral { theta: cfg.theta },
        Rule::Collapse => StoppingRule::Collapse { eps: 1e-6 },
    }
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    let base = RunOptions::default();
    match cfg.rule {
        Rule::Fixed => RunOptions { horizon: cfg.t_max, ..base },
        _ => RunOptions { horizon: base.horizon.max(cfg.t_max), ..base },
    }
}

fn reason_counts<'a>(reasons: impl Iterator<Item = &'a StopReason>) -> Value {
    let (mut c, mut th, mut h) = (0usize, 0usize, 0usize);
    for r in reasons {
        match r {
            StopReason::Collapsed => c += 1,
            StopReason::Threshold => th += 1,
            StopReason::Horizon => h += 1,
        }
    }
    json!({"collapsed": c, "threshold": th, "horizon": h})
}

/// Largest atom count for which the exact `T₂(law(a_t), μ)` is reported.
pub const TRANSPORT_ATOMS: usize = 16;

pub fn localize(cfg: &RunConfig) -> Result<Outcome> {
    let loc = presets::localizer(&cfg.measure)?;
    let opts = BatchOptions {
        time_grid: time_grid(cfg.t_max),
        transport: loc.measure().len() <= TRANSPORT_ATOMS,
        run: run_options(cfg),
        ..Default::default()
    };
    let res = loc.batch_run(stopping_rule(cfg), cfg.dt, cfg.paths, RngStream::root(cfg.seed), &opts)?;
    let r = &res.report;
    let normalized: Vec<Value> = r
        .time_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let ratio = r.mean_trA[k] / r.trace_a0;
            let se = r.se_trA[k] / r.trace_a0;
            let expected = (-t).exp();
            json!({"t": t, "ratio": ratio, "std_error": se, "expected": expected, "z": (ratio - expected) / se})
        })
        .collect();
    let op_a0 = max_eigenvalue(&loc.init().cov);
    // max over all records of ‖A_t‖_op · e^t
    let max_op_scaled = res
        .traces
        .iter()
        .flat_map(|tr| tr.times.iter().zip(&tr.op_a).map(|(t, op)| op * t.exp()))
        .fold(0.0, f64::max);
    let decay = if res.traces.len() >= MIN_DECAY_TRACES {
        match decay_diagnostic(&res.traces, None) {
            Ok(d) => serde_json::to_value(d).unwrap_or(Value::Null),
            Err(e) => json!({"unavailable": e.to_string()}),
        }
    } else {
        json!({"unavailable": format!("needs at least {MIN_DECAY_TRACES} paths")})
    };
    let mut csv = String::new();
    let mut buf = Vec::new();
    res.traces[0].write_csv(&mut buf).map_err(|e| stoloc_core::Error::Numerical(e.to_string()))?;
    csv.push_str(&String::from_utf8_lossy(&buf));
    Outcome::new(
        json!({
            "measure": cfg.measure,
            "atoms": loc.measure().len(),
            "dim": loc.dim(),
            "aggregate": r,
            "normalized_trace": normalized,
            "op_a0": op_a0,
            "max_op_scaled": max_op_scaled,
            "stop_reasons": reason_counts(res.traces.iter().map(|t| &t.stop_reason)),
            "substeps": res.traces.iter().map(|t| t.substeps).sum::<usize>(),
            "halvings": res.traces.iter().map(|t| t.halvings).sum::<usize>(),
            "floor_warnings": res.traces.iter().map(|t| t.floor_warnings).sum::<usize>(),
            "decay": decay,
        }),
        csv,
    )
}

pub fn stopped(cfg: &RunConfig) -> Result<Outcome> {
    let loc: Localizer = presets::localizer(&cfg.measure)?;
    let root = RngStream::root(cfg.seed);
    let report = loc.stopped_run(cfg.theta, cfg.dt, cfg.paths, root, &run_options(cfg))?;
    let endpoints: Vec<MartingaleEndpoint> =
        report.paths.iter().map(|p| MartingaleEndpoint::from_stopped(p, cfg.theta)).collect::<Result<_>>()?;
    let coupling = if endpoints.len() >= MIN_CONFORMANCE_SAMPLES {
        let (y, _) = maurey_sample(&endpoints, root.purpose("maurey"))?;
        let conformance = gaussian_conformance(&y, 4.0, Some(cfg.seed))?;
        let dominance = ConvexFunctional::catalog(loc.dim())
            .iter()
            .map(|phi| convex_dominance_check(&endpoints, phi, root.purpose("dominance")))
            .collect::<Result<Vec<_>>>()?;
        json!({"conformance": conformance, "dominance": dominance})
    } else {
        json!({"unavailable": format!("needs at least {MIN_CONFORMANCE_SAMPLES} paths")})
    };
    let n = loc.dim();
    let mut csv = String::from("path,stop_time,reason,op_integral");
    for k in 1..=n {
        let _ = write!(csv, ",m_{k}");
    }
    csv.push('\n');
    for (i, (p, e)) in report.paths.iter().zip(&endpoints).enumerate() {
        let _ = write!(csv, "{i},{:e},{:?},{:e}", p.stop_time, p.reason, p.op_integral);
        for v in e.m.iter() {
            let _ = write!(csv, ",{v:e}");
        }
        csv.push('\n');
    }
    Outcome::new(
        json!({
            "measure": cfg.measure,
            "stopped": report,
            "stop_reasons": reason_counts(report.paths.iter().map(|p| &p.reason)),
            "coupling": coupling,
        }),
        csv,
    )
}

/// `{family, n, N, estimate, CI, seed}` row shared by the estimator sweeps.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub family: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    pub estimate: f64,
    #[serde(rename = "CI")]
    pub ci: [f64; 2],
    pub std_error: f64,
    pub seed: u64,
    pub detail: Value,
}

const ESTIMATE_HEADER: &str = "n,family,N,estimate,ci_lo,ci_hi,std_error,seed";

fn estimate_csv(rows: &[EstimateRow]) -> String {
    let mut csv = format!("{ESTIMATE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:e},{:e},{:e},{:e},{}",
            r.n, r.family, r.samples, r.estimate, r.ci[0], r.ci[1], r.std_error, r.seed
        );
    }
    csv
}

/// Stream of dimension `n` in a sweep.
fn sweep_stream(cfg: &RunConfig, n: usize) -> RngStream {
    RngStream::root(cfg.seed).substream(n as u64)
}

pub fn tau(cfg: &RunConfig) -> Result<Outcome> {
    let rows = cfg
        .n
        .iter()
        .map(|&n| {
            let fam = DistributionFamily::from_name(&cfg.family, n)?;
            let est = estimate_tau(&fam, cfg.samples, sweep_stream(cfg, n))?;
            Ok(EstimateRow {
                family: est.family.clone(),
                n,
                samples: est.sample_count,
                estimate: est.tau,
                ci: [est.tau - 1.96 * est.std_error, est.tau + 1.96 * est.std_error],
                std_error: est.std_error,
                seed: cfg.seed,
                detail: json!({"tau_squared": est.tau_squared, "theta": est.theta, "iterations": est.iterations}),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = estimate_csv(&rows);
    Outcome::new(json!({"quantity": "tau", "estimates": rows}), csv)
}

pub fn sigma(cfg: &RunConfig) -> Result<Outcome> {
    let rows = cfg
        .n
        .iter()
        .map(|&n| {
            let fam = DistributionFamily::from_name(&cfg.family, n)?;
            let est = estimate_sigma(&fam, cfg.samples, sweep_stream(cfg, n))?;
            let reference = (fam.name() == "gaussian").then(|| chi_variance(n));
            Ok(EstimateRow {
                family: est.family.clone(),
                n,
                samples: est.sample_count,
                estimate: est.variance,
                ci: est.ci,
                std_error: est.std_error,
                seed: cfg.seed,
                detail: json!({"mean_norm": est.mean_norm, "gaussian_reference": reference}),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = estimate_csv(&rows);
    Outcome::new(json!({"quantity": "sigma_squared", "estimates": rows}), csv)
}

/// Largest dimension for which `widths` estimates the catalog τ̂ used by the
/// corollary bounds; the third-moment tensor has n³ entries.
pub const CATALOG_TAU_MAX_DIM: usize = 50;

pub fn widths(cfg: &RunConfig) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut csv = String::from("n,norm,M,M_se,M_star,M_star_se,c_n,E_Gamma,consistency_z,body,L_K\n");
    for &n in &cfg.n {
        let spec = NormSpec::from_name(&cfg.norm, n)?;
        let w = width_report(&spec, cfg.samples, sweep_stream(cfg, n))?;
        let body = BodySpec::from_name(&cfg.body, n)?;
        let l_k = isotropic_constant(&body)?;
        let _ = writeln!(
            csv,
            "{n},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            w.norm, w.m.mean, w.m.std_error, w.m_star.mean, w.m_star.std_error, w.c_n, w.gaussian.mean,
            w.consistency_z, body.name, l_k
        );
        let corollary = if (2..=CATALOG_TAU_MAX_DIM).contains(&n) {
            let stream = sweep_stream(cfg, n).purpose("corollary");
            let tau = catalog_tau(n, cfg.samples.max(MIN_TAU_SAMPLES), stream.purpose("tau"))?;
            let r = corollary_checks(&body, cfg.samples, stream, tau.lower_bound, cfg.lower_constant)?;
            json!({"tau_proxy": tau, "report": r})
        } else {
            json!({"unavailable": format!("needs 2 <= n <= {CATALOG_TAU_MAX_DIM}")})
        };
        rows.push(json!({"width": w, "body": body.name, "isotropic_constant": l_k, "corollary": corollary}));
    }
    Outcome::new(json!({"rows": rows}), csv)
}

pub fn compare(cfg: &RunConfig) -> Result<Outcome> {
    let reports = cfg
        .n
        .iter()
        .map(|&n| {
            let fam = DistributionFamily::from_name(&cfg.family, n)?;
            let spec = NormSpec::from_name(&cfg.norm, n)?;
            compare_norms_experiment(&fam, &spec, cfg.samples, sweep_stream(cfg, n), None, cfg.upper_constant)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buf = format!("{}\n", CompareReport::CSV_HEADER).into_bytes();
    for r in &reports {
        r.write_csv_row(&mut buf).map_err(|e| stoloc_core::Error::Numerical(e.to_string()))?;
    }
    Outcome::new(json!({"reports": reports}), String::from_utf8_lossy(&buf).into_owned())
}
