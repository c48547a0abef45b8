//! The invariant suite behind `stoloc verify`.
//!
//! Every check draws from its own named stream of the configured seed, so
//! checks can be added or reordered without disturbing the others.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};
use stoloc_core::constants::{estimate_sigma, estimate_tau, tau_from_samples};
use stoloc_core::coupling::{
    brascamp_lieb_check, convex_dominance_check, gaussian_conformance, maurey_extend, maurey_sample,
    ConvexFunctional, MartingaleEndpoint,
};
use stoloc_core::geometry::{
    compare_norms_experiment, corollary_checks, gaussian_norm_monte_carlo, isotropic_constant, mean_width_m,
    width_report, NormKind,
};
use stoloc_core::linalg::{max_eigenvalue, min_eigenvalue};
use stoloc_core::localization::{BatchOptions, LocalizationConfig, RunOptions, StoppingRule};
use stoloc_core::measures::{
    isotropize, measure_moments, t2_distance, DiscreteMeasure, PointCloud, Region, ThirdMomentAccumulator,
};
use stoloc_core::rng::StreamRng;
use stoloc_core::stats::{chi_square_gof, chi_variance, normal_cdf, normal_pdf, Running};
use stoloc_core::{BodySpec, DistributionFamily, Localizer, NormSpec, Result, RngStream};

use crate::config::{CommandKind, Rule, RunConfig};
use crate::presets;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

type CheckFn = fn(RngStream) -> Result<(bool, Value)>;

/// Name and body of every check, in report order.
pub const CHECKS: &[(&str, CheckFn)] = &[
    ("measures.isotropize_idempotent", isotropize_idempotent),
    ("measures.t2_triangle_inequality", t2_triangle),
    ("measures.moment_convergence_rate", moment_rate),
    ("measures.symmetric_third_moments_vanish", symmetric_third_moments),
    ("localization.step_invariants", step_invariants),
    ("localization.barycenter_martingale", martingale),
    ("localization.trace_decay", trace_decay),
    ("localization.pathwise_covariance_bound", pathwise_bound),
    ("localization.terminal_law", terminal_law),
    ("localization.tilt_form", tilt_form),
    ("coupling.maurey_sum_identity", maurey_identity),
    ("coupling.maurey_gaussian_conformance", maurey_conformance),
    ("coupling.truncated_gaussian_variances", truncated_variances),
    ("coupling.brascamp_lieb_margin", brascamp_lieb_margin),
    ("coupling.convex_dominance", convex_dominance),
    ("constants.contraction_symmetric_psd", contraction_psd),
    ("constants.tau_basis_invariance", tau_basis_invariance),
    ("constants.tau_exponential_product", tau_exponential),
    ("constants.tau_symmetric_rate", tau_rate),
    ("constants.sigma_gaussian_closed_form", sigma_gaussian),
    ("geometry.gauge_axioms", gauge_axioms),
    ("geometry.polar_duality", polar_duality),
    ("geometry.euclidean_mean_width", euclidean_width),
    ("geometry.l1_gaussian_expectation", l1_expectation),
    ("geometry.width_consistency", width_consistency),
    ("geometry.isotropic_constants", isotropic_constants),
    ("geometry.gaussian_compare_ratio", gaussian_compare),
    ("geometry.corollary_steps", corollary_steps),
    ("cli.report_determinism", report_determinism),
];

pub fn run_suite(seed: u64) -> SuiteReport {
    let root = RngStream::root(seed);
    let checks: Vec<Check> = CHECKS
        .iter()
        .map(|(name, f)| match f(root.purpose(name)) {
            Ok((pass, detail)) => Check { name: (*name).into(), pass, detail },
            Err(e) => Check { name: (*name).into(), pass: false, detail: json!({"error": e.to_string()}) },
        })
        .collect();
    let passed = checks.iter().filter(|c| c.pass).count();
    SuiteReport { pass: passed == checks.len(), passed, failed: checks.len() - passed, checks }
}

fn random_measure(rng: &mut StreamRng, dim: usize, max_atoms: usize) -> Result<DiscreteMeasure> {
    let k = rng.random_range(1..=max_atoms);
    let atoms = (0..k).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let masses = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    DiscreteMeasure::normalized(atoms, masses)
}

fn gaussian_vec(rng: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }).collect()
}

fn isotropize_idempotent(s: RngStream) -> Result<(bool, Value)> {
    let mut rng = s.rng();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut mu = random_measure(&mut rng, 3, 12)?;
        while mu.len() < 4 {
            mu = random_measure(&mut rng, 3, 12)?;
        }
        let once = isotropize(&mu)?;
        let twice = isotropize(&once)?;
        for (a, b) in once.atoms_flat().iter().zip(twice.atoms_flat()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-8, json!({"max_abs_difference": worst, "tolerance": 1e-8})))
}

fn t2_triangle(s: RngStream) -> Result<(bool, Value)> {
    let mut rng = s.rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..30 {
        let a = random_measure(&mut rng, 2, 10)?;
        let b = random_measure(&mut rng, 2, 10)?;
        let c = random_measure(&mut rng, 2, 10)?;
        let excess = t2_distance(&a, &c)?.sqrt() - t2_distance(&a, &b)?.sqrt() - t2_distance(&b, &c)?.sqrt();
        worst = worst.max(excess);
    }
    Ok((worst <= 1e-9, json!({"max_excess": worst, "tolerance": 1e-9})))
}

/// Largest |z| of the sample mean and covariance entries against (0, id).
fn moment_z(points: &PointCloud) -> f64 {
    let n = points.dim();
    let mut first = vec![Running::default(); n];
    let mut second = vec![Running::default(); n * n];
    for p in points.iter() {
        for i in 0..n {
            first[i].push(p[i]);
            for j in 0..n {
                second[i * n + j].push(p[i] * p[j]);
            }
        }
    }
    let mut z = 0.0f64;
    for r in &first {
        z = z.max((r.mean / r.std_error()).abs());
    }
    for i in 0..n {
        for j in 0..n {
            let r = &second[i * n + j];
            let target = if i == j { 1.0 } else { 0.0 };
            z = z.max(((r.mean - target) / r.std_error()).abs());
        }
    }
    z
}

fn moment_rate(s: RngStream) -> Result<(bool, Value)> {
    let mut rows = Vec::new();
    let mut pass = true;
    for fam in stoloc_core::constants::log_concave_catalog(3) {
        for count in [1_000, 10_000, 100_000] {
            let z = moment_z(&fam.sample(count, s.purpose(&fam.name()).substream(count as u64))?);
            pass &= z <= 5.0;
            rows.push(json!({"family": fam.name(), "N": count, "max_z": z}));
        }
    }
    Ok((pass, json!({"threshold_z": 5.0, "rows": rows})))
}

fn symmetric_third_moments(s: RngStream) -> Result<(bool, Value)> {
    let mut rows = Vec::new();
    let mut pass = true;
    for name in ["gaussian", "cube", "ball", "two-point"] {
        let fam = DistributionFamily::from_name(name, 3)?;
        let pts = fam.sample(100_000, s.purpose(name))?;
        let mut entries = vec![Running::default(); 27];
        for p in pts.iter() {
            for (k, e) in entries.iter_mut().enumerate() {
                e.push(p[k / 9] * p[(k / 3) % 3] * p[k % 3]);
            }
        }
        let z = entries.iter().map(|e| (e.mean / e.std_error()).abs()).fold(0.0, f64::max);
        pass &= z <= 4.0;
        rows.push(json!({"family": name, "max_z": z}));
    }
    Ok((pass, json!({"threshold_z": 4.0, "rows": rows})))
}

fn step_invariants(s: RngStream) -> Result<(bool, Value)> {
    let mu = presets::measure("four-atom")?;
    let loc = Localizer::new(&mu, LocalizationConfig::default())?;
    let (mut weight_err, mut psd_floor, mut moment_err) = (0.0f64, f64::INFINITY, 0.0f64);
    let (mut qv_floor, mut b_floor) = (f64::INFINITY, f64::INFINITY);
    let mut steps = 0usize;
    let dt: f64 = 1e-3;
    for path in 0..20 {
        let mut rng = s.substream(path).rng();
        let mut st = loc.init();
        for _ in 0..2000 {
            if st.collapsed {
                break;
            }
            let dw = gaussian_vec(&mut rng, 2, dt.sqrt());
            let next = loc.step(&st, dt, &dw)?;
            let w = next.weights();
            weight_err = weight_err.max((w.iter().sum::<f64>() - 1.0).abs());
            psd_floor = psd_floor.min(min_eigenvalue(&next.cov));
            let fresh = measure_moments(&DiscreteMeasure::new(
                (0..mu.len()).map(|i| mu.atom(i).to_vec()).collect(),
                w.clone(),
            )?, 2)?;
            moment_err = moment_err
                .max((&fresh.mean - &next.mean).amax())
                .max((&fresh.covariance - &next.cov).amax());
            let scale = 1.0 + next.qv_accum.amax();
            qv_floor = qv_floor.min(min_eigenvalue(&(&next.qv_accum - &st.qv_accum)) / scale);
            let scale = 1.0 + next.b_accum.amax();
            b_floor = b_floor.min(min_eigenvalue(&(&next.b_accum - &st.b_accum)) / scale);
            st = next;
            steps += 1;
        }
    }
    let pass = weight_err <= 1e-10 && psd_floor >= -1e-10 && moment_err <= 1e-8 && qv_floor >= -1e-12 && b_floor >= -1e-12;
    Ok((
        pass,
        json!({
            "steps": steps,
            "weight_sum_error": weight_err,
            "min_covariance_eigenvalue": psd_floor,
            "moment_recompute_error": moment_err,
            "min_qv_increment_eigenvalue": qv_floor,
            "min_b_increment_eigenvalue": b_floor,
        }),
    ))
}

fn asymmetric_batch(s: RngStream) -> Result<(Localizer, stoloc_core::localization::BatchResult)> {
    let loc = presets::localizer("twopoint:0.7")?;
    let opts = BatchOptions { time_grid: vec![0.5, 1.0, 2.0], ..Default::default() };
    let res = loc.batch_run(StoppingRule::FixedHorizon { t_max: 2.0 }, 1e-3, 2000, s, &opts)?;
    Ok((loc, res))
}

fn martingale(s: RngStream) -> Result<(bool, Value)> {
    let (loc, res) = asymmetric_batch(s)?;
    let a0 = loc.init().mean[0];
    let r = &res.report;
    let z: Vec<f64> = (0..r.time_grid.len()).map(|k| (r.mean_a[k][0] - a0) / r.se_a[k][0]).collect();
    let pass = z.iter().all(|z| z.abs() <= 4.0);
    Ok((pass, json!({"a0": a0, "time_grid": r.time_grid, "mean_a": r.mean_a, "z": z, "threshold_z": 4.0})))
}

fn trace_decay(s: RngStream) -> Result<(bool, Value)> {
    let (_, res) = asymmetric_batch(s)?;
    let r = &res.report;
    let z: Vec<f64> = r
        .time_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| (r.mean_trA[k] - (-t).exp() * r.trace_a0) / r.se_trA[k])
        .collect();
    let pass = z.iter().all(|z| z.abs() <= 3.0);
    Ok((pass, json!({"time_grid": r.time_grid, "mean_trA": r.mean_trA, "z": z, "threshold_z": 3.0})))
}

/// Largest `‖A_t‖_op / (e^{-t}(1 + 5 dt))` over all records of `paths` paths.
pub fn pathwise_ratio(loc: &Localizer, paths: usize, t_max: f64, dt: f64, s: RngStream) -> Result<f64> {
    let opts = RunOptions { horizon: t_max, ..Default::default() };
    let traces = loc.run_paths(StoppingRule::FixedHorizon { t_max }, dt, paths, s, &opts)?;
    Ok(traces
        .iter()
        .flat_map(|tr| tr.times.iter().zip(&tr.op_a).map(|(t, op)| op / ((-t).exp() * (1.0 + 5.0 * dt))))
        .fold(0.0, f64::max))
}

fn pathwise_bound(s: RngStream) -> Result<(bool, Value)> {
    let interval = pathwise_ratio(&presets::localizer("interval-grid")?, 200, 2.0, 1e-3, s.purpose("interval"))?;
    let slab = pathwise_ratio(&presets::localizer("slab-grid")?, 40, 2.0, 1e-3, s.purpose("slab"))?;
    Ok((
        interval <= 1.0 && slab <= 1.0,
        json!({"interval_max_ratio": interval, "slab_max_ratio": slab, "interval_paths": 200, "slab_paths": 40}),
    ))
}

fn terminal_law(s: RngStream) -> Result<(bool, Value)> {
    let loc = presets::localizer("twopoint:0.7")?;
    let traces = loc.run_paths(StoppingRule::Collapse { eps: 1e-6 }, 1e-3, 5000, s, &RunOptions::default())?;
    let f = loc.terminal_frequencies(&traces)?;
    let (chi, p) = chi_square_gof(&f.counts, loc.measure().weights())?;
    Ok((p > 1e-3 && f.uncollapsed == 0, json!({"counts": f.counts, "chi_square": chi, "p_value": p, "uncollapsed": f.uncollapsed})))
}

fn tilt_form(s: RngStream) -> Result<(bool, Value)> {
    let atoms = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.2],
        vec![-0.5, 1.0],
        vec![0.3, -1.1],
        vec![-1.2, -0.4],
        vec![0.8, 0.9],
    ];
    let mu = DiscreteMeasure::normalized(atoms, vec![1.0, 2.0, 1.5, 1.0, 0.5, 1.0])?;
    let loc = Localizer::new(&mu, LocalizationConfig::default())?;
    let mut worst = 0.0f64;
    for path in 0..5 {
        let mut rng = s.substream(path).rng();
        let mut st = loc.init();
        for _ in 0..1000 {
            if st.collapsed {
                break;
            }
            st = loc.step(&st, 1e-3, &gaussian_vec(&mut rng, 2, 1e-3f64.sqrt()))?;
        }
        worst = worst.max(loc.tilt_residual(&st)?);
    }
    Ok((worst < 1e-2, json!({"max_residual": worst, "tolerance": 1e-2})))
}

fn maurey_identity(s: RngStream) -> Result<(bool, Value)> {
    let mut rng = s.rng();
    let mut worst_ulps = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let root = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut qv = &root * root.transpose();
        let top = max_eigenvalue(&qv);
        if top > 1.0 {
            qv /= top;
        }
        let m = gaussian_vec(&mut rng, n, 1.0);
        let g = gaussian_vec(&mut rng, n, 1.0);
        let e = MartingaleEndpoint::new(m, qv)?;
        let (y, z) = maurey_extend(&e, &g)?;
        for k in 0..n {
            let scale = (y[k].abs() + z[k].abs()).max(f64::MIN_POSITIVE);
            worst_ulps = worst_ulps.max((y[k] + z[k] - 2.0 * e.m[k]).abs() / (f64::EPSILON * scale));
        }
    }
    Ok((worst_ulps <= 4.0, json!({"max_error_ulps": worst_ulps, "tolerance_ulps": 4.0})))
}

fn stopped_endpoints(measure: &str, s: RngStream) -> Result<Vec<MartingaleEndpoint>> {
    let loc = presets::localizer(measure)?;
    let report = loc.stopped_run(1.0, 1e-3, 2000, s, &RunOptions::default())?;
    report.paths.iter().map(|p| MartingaleEndpoint::from_stopped(p, 1.0)).collect()
}

const STOPPED_MEASURES: [&str; 2] = ["twopoint", "three-atom"];

fn maurey_conformance(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for name in STOPPED_MEASURES {
        let es = stopped_endpoints(name, s.purpose(name))?;
        let (y, _) = maurey_sample(&es, s.purpose(name).purpose("maurey"))?;
        let r = gaussian_conformance(&y, 4.0, None)?;
        pass &= r.pass;
        let worst = r.deviations.iter().map(|d| d.z).fold(0.0, f64::max);
        rows.push(json!({"measure": name, "pass": r.pass, "max_z": worst}));
    }
    Ok((pass, json!({"threshold_z": 4.0, "rows": rows})))
}

fn convex_dominance(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for name in STOPPED_MEASURES {
        let es = stopped_endpoints(name, s.purpose(name))?;
        for phi in ConvexFunctional::catalog(es[0].dim()) {
            let g = convex_dominance_check(&es, &phi, s.purpose(name).purpose(phi.name()))?;
            pass &= g.holds(3.0);
            rows.push(json!({"measure": name, "phi": g.phi, "gap": g.gap, "z": g.z}));
        }
    }
    Ok((pass, json!({"threshold_z": 3.0, "rows": rows})))
}

fn truncated_variances(s: RngStream) -> Result<(bool, Value)> {
    let cube = DistributionFamily::truncated(Region::Cube { half_width: 1.0 }, 1)?;
    let half = DistributionFamily::truncated(Region::HalfSpace { normal: vec![1.0], offset: 0.0 }, 1)?;
    let interval_target = 1.0 - 2.0 * normal_pdf(1.0) / (2.0 * normal_cdf(1.0) - 1.0);
    let half_target = 1.0 - 2.0 / PI;
    let a = brascamp_lieb_check(&cube, 100_000, s.purpose("interval"))?;
    let b = brascamp_lieb_check(&half, 100_000, s.purpose("half-line"))?;
    let za = (a.covariance[0] - interval_target) / a.covariance_se[0];
    let zb = (b.covariance[0] - half_target) / b.covariance_se[0];
    Ok((
        za.abs() <= 4.0 && zb.abs() <= 4.0,
        json!({"interval": {"variance": a.covariance[0], "z": za}, "half_line": {"variance": b.covariance[0], "z": zb}}),
    ))
}

fn brascamp_lieb_margin(s: RngStream) -> Result<(bool, Value)> {
    let families = [
        DistributionFamily::gaussian(2),
        DistributionFamily::from_name("truncated-cube:1", 2)?,
        DistributionFamily::from_name("truncated-slab:0.5", 2)?,
        DistributionFamily::from_name("halfspace", 2)?,
    ];
    let mut pass = true;
    let mut rows = Vec::new();
    for fam in &families {
        let r = brascamp_lieb_check(fam, 100_000, s.purpose(&fam.name()))?;
        pass &= r.pass;
        rows.push(json!({"family": r.family, "margin": r.margin, "std_error": r.std_error}));
    }
    Ok((pass, json!({"rows": rows})))
}

fn contraction_psd(s: RngStream) -> Result<(bool, Value)> {
    let mut worst_asym = 0.0f64;
    let mut worst_neg = 0.0f64;
    for name in ["exp", "gaussian", "cube"] {
        let pts = DistributionFamily::from_name(name, 4)?.sample(10_000, s.purpose(name))?;
        let mut acc = ThirdMomentAccumulator::new(4);
        for p in pts.iter() {
            acc.push(p);
        }
        let m = acc.finish().pair_contraction();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        worst_asym = worst_asym.max((&m - m.transpose()).amax() / scale);
        worst_neg = worst_neg.max(-min_eigenvalue(&m) / scale);
    }
    Ok((
        worst_asym <= 1e-10 && worst_neg <= 1e-10,
        json!({"relative_asymmetry": worst_asym, "relative_negative_eigenvalue": worst_neg}),
    ))
}

fn tau_basis_invariance(s: RngStream) -> Result<(bool, Value)> {
    let n = 4;
    let pts = DistributionFamily::exponential(n).sample(100_000, s.purpose("samples"))?;
    let mut rng = s.purpose("rotation").rng();
    let q = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng)).qr().q();
    let rotated = pts.map_points(|x, out| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|c| q[(r, c)] * x[c]).sum();
        }
    });
    let a = tau_from_samples(&pts, s.seed)?;
    let b = tau_from_samples(&rotated, s.seed)?;
    let se = a.std_error.hypot(b.std_error);
    Ok(((a.tau - b.tau).abs() <= 2.0 * se, json!({"tau": a.tau, "tau_rotated": b.tau, "combined_se": se})))
}

fn tau_exponential(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for n in [2, 10] {
        let est = estimate_tau(&DistributionFamily::exponential(n), 100_000, s.substream(n as u64))?;
        pass &= (est.tau / 2.0 - 1.0).abs() <= 0.1;
        rows.push(json!({"n": n, "tau": est.tau, "std_error": est.std_error}));
    }
    Ok((pass, json!({"target": 2.0, "relative_tolerance": 0.1, "rows": rows})))
}

fn tau_rate(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for count in [10_000, 100_000, 1_000_000] {
        let est = estimate_tau(&DistributionFamily::gaussian(3), count, s.substream(count as u64))?;
        let scaled = est.tau * (count as f64).sqrt();
        pass &= scaled < 20.0;
        rows.push(json!({"N": count, "tau": est.tau, "tau_sqrt_N": scaled}));
    }
    Ok((pass, json!({"bound_tau_sqrt_N": 20.0, "rows": rows})))
}

fn sigma_gaussian(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for n in [1, 2, 8] {
        let est = estimate_sigma(&DistributionFamily::gaussian(n), 100_000, s.substream(n as u64))?;
        let target = chi_variance(n);
        pass &= est.within_intervals(target, 3.0);
        rows.push(json!({"n": n, "variance": est.variance, "target": target, "ci": est.ci}));
    }
    Ok((pass, json!({"intervals": 3.0, "rows": rows})))
}

fn catalog_specs(n: usize) -> Result<Vec<NormSpec>> {
    let matrix: Vec<f64> = (0..n * n).map(|k| if k % (n + 1) == 0 { 2.0 } else { 0.3 }).collect();
    Ok(vec![
        NormSpec::lp(1.0, n)?,
        NormSpec::lp(2.0, n)?,
        NormSpec::lp(3.5, n)?,
        NormSpec::lp(f64::INFINITY, n)?,
        NormSpec::new(NormKind::WeightedLp { p: 1.5, weights: (1..=n).map(|i| i as f64).collect() }, n)?,
        NormSpec::cube_facets(n)?,
        NormSpec::cross_polytope_vertices(n)?,
        NormSpec::new(NormKind::LinearMap { rows: n, matrix }, n)?,
    ])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gauge_axioms(s: RngStream) -> Result<(bool, Value)> {
    let n = 4;
    let mut rng = s.rng();
    let (mut homog, mut tri) = (0.0f64, f64::NEG_INFINITY);
    for spec in catalog_specs(n)? {
        for _ in 0..1000 {
            let x = gaussian_vec(&mut rng, n, 2.0);
            let y = gaussian_vec(&mut rng, n, 2.0);
            let lambda: f64 = rng.random_range(0.01..50.0);
            let gx = spec.gauge(&x)?;
            let gy = spec.gauge(&y)?;
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            homog = homog.max((spec.gauge(&scaled)? - lambda * gx).abs() / (1.0 + lambda * gx));
            tri = tri.max((spec.gauge(&sum)? - gx - gy) / (1.0 + gx + gy));
        }
    }
    Ok((
        homog <= 1e-10 && tri <= 1e-10,
        json!({"pairs_per_norm": 1000, "homogeneity_error": homog, "triangle_excess": tri, "tolerance": 1e-10}),
    ))
}

fn polar_duality(s: RngStream) -> Result<(bool, Value)> {
    let n = 4;
    let mut rng = s.rng();
    let mut excess = f64::NEG_INFINITY;
    for spec in catalog_specs(n)? {
        let polar = spec.polar()?;
        for _ in 0..1000 {
            let x = gaussian_vec(&mut rng, n, 1.0);
            let y = gaussian_vec(&mut rng, n, 1.0);
            let bound = spec.gauge(&x)? * polar.gauge(&y)?;
            excess = excess.max((dot(&x, &y) - bound) / (1.0 + bound.abs()));
        }
    }
    // Hölder equality on aligned pairs
    let mut holder = 0.0f64;
    for p in [1.5, 2.0, 3.0, 7.0] {
        let spec = NormSpec::lp(p, n)?;
        let polar = spec.polar()?;
        for _ in 0..200 {
            let x = gaussian_vec(&mut rng, n, 1.0);
            let y: Vec<f64> = x.iter().map(|v| v.signum() * v.abs().powf(p - 1.0)).collect();
            let prod = spec.gauge(&x)? * polar.gauge(&y)?;
            holder = holder.max((dot(&x, &y) - prod).abs() / prod.max(1.0));
        }
    }
    Ok((
        excess <= 1e-10 && holder <= 1e-9,
        json!({"max_duality_excess": excess, "max_holder_gap": holder}),
    ))
}

fn euclidean_width(s: RngStream) -> Result<(bool, Value)> {
    let values = [2, 10, 50]
        .iter()
        .map(|&n| mean_width_m(&NormSpec::euclidean(n), 10_000, s).map(|m| m.mean))
        .collect::<Result<Vec<_>>>()?;
    Ok((values.iter().all(|&m| m == 1.0), json!({"n": [2, 10, 50], "M": values})))
}

fn l1_expectation(s: RngStream) -> Result<(bool, Value)> {
    let n = 10;
    let mc = gaussian_norm_monte_carlo(&NormSpec::lp(1.0, n)?, 100_000, s)?;
    let exact = n as f64 * (2.0 / PI).sqrt();
    let rel = mc.mean / exact - 1.0;
    Ok((rel.abs() <= 0.01, json!({"estimate": mc.mean, "exact": exact, "relative_error": rel})))
}

fn width_consistency(s: RngStream) -> Result<(bool, Value)> {
    let n = 10;
    let mut pass = true;
    let mut rows = Vec::new();
    for spec in [NormSpec::cube_facets(n)?, NormSpec::cross_polytope_vertices(n)?] {
        let w = width_report(&spec, 100_000, s.purpose(&spec.name()))?;
        pass &= w.consistency_z.abs() <= 2.0;
        rows.push(json!({"norm": w.norm, "M_c_n": w.m.mean * w.c_n, "E_Gamma": w.gaussian.mean, "z": w.consistency_z}));
    }
    Ok((pass, json!({"threshold_z": 2.0, "rows": rows})))
}

fn isotropic_constants(_: RngStream) -> Result<(bool, Value)> {
    let cube = isotropic_constant(&BodySpec::isotropic_cube(3)?)?;
    let disc = isotropic_constant(&BodySpec::isotropic_ball(2)?)?;
    let cube_exact = 1.0 / (2.0 * 3f64.sqrt());
    let disc_exact = 1.0 / (4.0 * PI).sqrt();
    Ok((
        (cube - cube_exact).abs() <= 1e-12 && (disc - disc_exact).abs() <= 1e-12,
        json!({"cube": cube, "cube_exact": cube_exact, "disc": disc, "disc_exact": disc_exact}),
    ))
}

fn gaussian_compare(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for n in [2, 10, 50] {
        for norm in ["l1", "l2", "linf"] {
            let r = compare_norms_experiment(
                &DistributionFamily::gaussian(n),
                &NormSpec::from_name(norm, n)?,
                100_000,
                s.purpose(norm).substream(n as u64),
                Some(0.0),
                1.0,
            )?;
            let z = (r.ratio - 1.0) / r.ratio_se;
            pass &= z.abs() <= 2.0;
            rows.push(json!({"n": n, "norm": norm, "ratio": r.ratio, "z": z}));
        }
    }
    Ok((pass, json!({"threshold_z": 2.0, "rows": rows})))
}

fn corollary_steps(s: RngStream) -> Result<(bool, Value)> {
    let mut pass = true;
    let mut rows = Vec::new();
    for body in ["cube", "ball"] {
        for n in [3, 8] {
            let r = corollary_checks(&BodySpec::from_name(body, n)?, 100_000, s.purpose(body).substream(n as u64), 1.0, 0.01)?;
            pass &= r.quarter_holds && r.polar_holds;
            rows.push(json!({
                "body": body, "n": n, "gauge_mean": r.gauge_mean.mean, "polar_mean": r.polar_mean.mean,
                "quarter_holds": r.quarter_holds, "polar_holds": r.polar_holds,
            }));
        }
    }
    Ok((pass, json!({"rows": rows})))
}

fn report_determinism(s: RngStream) -> Result<(bool, Value)> {
    let mut cfg = RunConfig::defaults(CommandKind::Localize);
    cfg.seed = s.seed;
    cfg.paths = 200;
    cfg.rule = Rule::Fixed;
    let first = crate::render_report(&cfg, &crate::commands::localize(&cfg)?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| stoloc_core::Error::Numerical(e.to_string()))?;
    let second = pool.install(|| crate::commands::localize(&cfg).and_then(|o| crate::render_report(&cfg, &o)))?;
    let embeds = first.contains(crate::VERSION) && first.contains(&format!("\"seed\": {}", cfg.seed));
    Ok((first == second && embeds, json!({"identical": first == second, "embeds_version_and_seed": embeds})))
}
