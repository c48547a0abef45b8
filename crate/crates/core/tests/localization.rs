use std::time::Instant;

use stoloc_core::localization::{
    decay_diagnostic, BatchOptions, LocalizationConfig, Localizer, RunOptions, StopReason, StoppingRule,
};
use stoloc_core::measures::{discretize_density, DiscreteMeasure};
use stoloc_core::rng::RngStream;
use stoloc_core::stats::chi_square_gof;

fn two_point(p: f64) -> Localizer {
    Localizer::new(&DiscreteMeasure::two_point(p).unwrap(), LocalizationConfig::default()).unwrap()
}

fn gaussian_grid() -> Localizer {
    let g = discretize_density(|x| -0.5 * x[0] * x[0], &[(-6.0, 6.0)], 512).unwrap();
    Localizer::from_grid(&g, LocalizationConfig::default()).unwrap()
}

/// Independent simulator of the weight `p` of the atom at +1 for a measure on {-1, +1},
/// written directly in terms of `p` (continuum limit `dp = sqrt(p(1-p)) dW`).
fn two_atom_weight_path(p0: f64, t: f64, dt: f64, dws: impl Iterator<Item = f64>) -> f64 {
    let mut p = p0;
    for dw in dws.take((t / dt).round() as usize) {
        // ±1 atoms: A = 4p(1-p), A^{-1/2}(x - a) = (x - a) / sqrt(A)
        let a = 2.0 * p - 1.0;
        let var = 4.0 * p * (1.0 - p);
        if var < 1e-14 {
            break;
        }
        let s = var.sqrt();
        let lp = (1.0 - a) / s * dw - 0.5 * (1.0 - a).powi(2) / var * dt;
        let lm = (-1.0 - a) / s * dw - 0.5 * (1.0 + a).powi(2) / var * dt;
        let (wp, wm) = (p * lp.exp(), (1.0 - p) * lm.exp());
        p = wp / (wp + wm);
    }
    p
}

#[test]
fn single_step_matches_reduced_diffusion() {
    let loc = two_point(0.5);
    let st = loc.step(&loc.init(), 0.01, &[0.1]).unwrap();
    let p = st.weights()[1];
    let oracle = two_atom_weight_path(0.5, 0.01, 0.01, std::iter::once(0.1));
    assert!((p - oracle).abs() < 1e-12);
    // first order: p + sqrt(p(1-p)) dW = 0.55
    assert!((p - 0.55).abs() < 0.01);
}

#[test]
fn trace_decay_two_point() {
    let loc = two_point(0.5);
    let start = Instant::now();
    let opts = BatchOptions { time_grid: vec![0.5, 1.0, 2.0], ..Default::default() };
    let res = loc
        .batch_run(StoppingRule::FixedHorizon { t_max: 2.0 }, 1e-3, 2000, RngStream::root(11), &opts)
        .unwrap();
    eprintln!("2000 paths to t=2: {:?}", start.elapsed());
    let r = &res.report;
    for (k, &t) in r.time_grid.iter().enumerate() {
        let target = (-t as f64).exp();
        assert!((r.mean_trA[k] - target).abs() <= 3.0 * r.se_trA[k], "t={t} {} vs {target} (se {})", r.mean_trA[k], r.se_trA[k]);
        assert!(r.mean_a[k][0].abs() <= 4.0 * r.se_a[k][0]);
    }
    let decay = decay_diagnostic(&res.traces, None).unwrap();
    assert!((-1.2..=-0.8).contains(&decay.slope), "slope {}", decay.slope);
}

#[test]
fn terminal_law_two_point() {
    let loc = two_point(0.7);
    let traces = loc
        .run_paths(StoppingRule::Collapse { eps: 1e-6 }, 1e-3, 5000, RngStream::root(12), &RunOptions::default())
        .unwrap();
    assert!(traces.iter().all(|t| t.stop_reason == StopReason::Collapsed));
    let f = loc.terminal_frequencies(&traces).unwrap();
    let (_, p) = chi_square_gof(&f.counts, &[0.3, 0.7]).unwrap();
    assert!(p > 1e-3, "p = {p}, counts {:?}", f.counts);
}

#[test]
fn gaussian_grid_follows_exponential_law() {
    let loc = gaussian_grid();
    let st = loc.init();
    assert!((st.cov[(0, 0)] - 1.0).abs() < 1e-4);
    let tr = loc
        .run(st, StoppingRule::FixedHorizon { t_max: 3.0 }, 1e-3, RngStream::root(1), &RunOptions::default())
        .unwrap();
    for i in 0..tr.len() {
        let t = tr.times[i];
        let rel = tr.tr_a[i] / (-t).exp() - 1.0;
        assert!(rel.abs() < 0.02, "t={t} rel={rel}");
    }
}

#[test]
fn gaussian_threshold_stops_at_ln2() {
    let loc = gaussian_grid();
    let tr = loc
        .run(loc.init(), StoppingRule::OpNormIntegral { theta: 0.5 }, 1e-3, RngStream::root(2), &RunOptions::default())
        .unwrap();
    assert_eq!(tr.stop_reason, StopReason::Threshold);
    assert!((tr.stop_time / std::f64::consts::LN_2 - 1.0).abs() < 0.05, "T = {}", tr.stop_time);
    assert!(tr.final_qv[0] <= 0.5 * (1.0 + 1e-12));
}

#[test]
fn tilt_residual_small_in_two_dimensions() {
    let atoms = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.2],
        vec![-0.5, 1.0],
        vec![0.3, -1.1],
        vec![-1.2, -0.4],
        vec![0.8, 0.9],
    ];
    let mu = DiscreteMeasure::normalized(atoms, vec![1.0, 2.0, 1.5, 1.0, 0.5, 1.0]).unwrap();
    let loc = Localizer::new(&mu, LocalizationConfig::default()).unwrap();
    use rand_distr::{Distribution, StandardNormal};
    for seed in 0..5 {
        let mut tr_state = loc.init();
        let mut rng = RngStream::new(seed, 0).rng();
        for _ in 0..1000 {
            if tr_state.collapsed {
                break;
            }
            let dw: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).map(|z: f64| z * 1e-3_f64.sqrt()).collect();
            tr_state = loc.step(&tr_state, 1e-3, &dw).unwrap();
        }
        assert!(loc.tilt_residual(&tr_state).unwrap() < 1e-2);
    }
}

#[test]
fn t2_bound_on_four_atoms() {
    let atoms = vec![vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.0, -1.0], vec![0.3, 1.2]];
    let mu = DiscreteMeasure::normalized(atoms, vec![0.3, 0.2, 0.25, 0.25]).unwrap();
    let loc = Localizer::new(&mu, LocalizationConfig::default()).unwrap();
    let opts = BatchOptions { time_grid: vec![0.5, 1.0, 2.0], transport: true, ..Default::default() };
    let res = loc
        .batch_run(StoppingRule::FixedHorizon { t_max: 2.0 }, 1e-3, 1000, RngStream::root(5), &opts)
        .unwrap();
    let t2 = res.report.t2_to_mu.unwrap();
    for (k, &t) in res.report.time_grid.iter().enumerate() {
        assert!(t2[k] <= 1.2 * (-t as f64).exp() * loc.trace_a0(), "t={t}: {}", t2[k]);
    }
}
