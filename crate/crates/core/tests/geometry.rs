use stoloc_core::geometry::{
    c_n, compare_norms_experiment, corollary_checks, gaussian_norm_expectation, gaussian_norm_monte_carlo,
    isotropic_constant, mean_width_m, mean_width_mstar, width_report, BodySpec, NormSpec,
};
use stoloc_core::measures::DistributionFamily;
use stoloc_core::rng::RngStream;
use stoloc_core::stats::simpson;

#[test]
fn linf_gaussian_expectation_n50() {
    let spec = NormSpec::lp(f64::INFINITY, 50).unwrap();
    let exact = gaussian_norm_expectation(&spec, 0, RngStream::root(0)).unwrap().mean;
    let mc = gaussian_norm_monte_carlo(&spec, 100_000, RngStream::root(1)).unwrap();
    assert!(mc.within(exact, 4.0), "{exact} vs {mc:?}");
    // independent quadrature value
    assert!((exact - 2.5095974349675).abs() < 1e-9);
    // the first-order extreme-value guess sqrt(2 ln n) overshoots at n = 50
    assert!(exact < (2.0 * 50f64.ln()).sqrt());
}

#[test]
fn l1_monte_carlo_within_one_percent() {
    let spec = NormSpec::lp(1.0, 10).unwrap();
    let mc = gaussian_norm_monte_carlo(&spec, 100_000, RngStream::root(2)).unwrap();
    assert!((mc.mean / (10.0 * (2.0 / std::f64::consts::PI).sqrt()) - 1.0).abs() < 0.01);
}

#[test]
fn mean_width_polar_coordinates() {
    for (spec, seed) in [
        (NormSpec::cube_facets(10).unwrap(), 3),
        (NormSpec::cross_polytope_vertices(10).unwrap(), 4),
        (NormSpec::lp(f64::INFINITY, 10).unwrap(), 5),
    ] {
        let r = width_report(&spec, 20_000, RngStream::root(seed)).unwrap();
        assert!(r.consistency_z.abs() <= 4.0, "{}: z = {}", r.norm, r.consistency_z);
    }
    let mstar = mean_width_mstar(&NormSpec::lp(f64::INFINITY, 10).unwrap(), 20_000, RngStream::root(6)).unwrap();
    let target = 10.0 * (2.0 / std::f64::consts::PI).sqrt() / c_n(10);
    assert!(mstar.within(target, 4.0), "{mstar:?} vs {target}");
}

#[test]
fn isotropic_constants() {
    assert!((isotropic_constant(&BodySpec::isotropic_cube(3).unwrap()).unwrap() - 0.28868).abs() < 1e-5);
    assert!((isotropic_constant(&BodySpec::isotropic_ball(2).unwrap()).unwrap() - 0.28209).abs() < 1e-5);
    assert!((isotropic_constant(&BodySpec::isotropic_cube(1).unwrap()).unwrap() - 1.0 / 12f64.sqrt()).abs() < 1e-15);
}

#[test]
fn euclidean_width_is_one() {
    assert_eq!(mean_width_m(&NormSpec::euclidean(5), 10_000, RngStream::root(0)).unwrap().mean, 1.0);
}

#[test]
fn exponential_l1_ratio() {
    // E|E - 1| = 2/e
    let abs_mean = simpson(|x| (x - 1.0).abs() * (-x).exp(), 0.0, 1.0, 2000) + simpson(|x| (x - 1.0) * (-x).exp(), 1.0, 60.0, 60_000);
    assert!((abs_mean - 2.0 / std::f64::consts::E).abs() < 1e-9);
    let target = abs_mean / (2.0 / std::f64::consts::PI).sqrt();
    let r = compare_norms_experiment(
        &DistributionFamily::exponential(20),
        &NormSpec::lp(1.0, 20).unwrap(),
        100_000,
        RngStream::root(7),
        Some(2.0),
        10.0,
    )
    .unwrap();
    assert!((r.ratio / target - 1.0).abs() < 0.05, "{}", r.ratio);
}

#[test]
fn exponential_linf_ratio_n50() {
    let r = compare_norms_experiment(
        &DistributionFamily::exponential(50),
        &NormSpec::lp(f64::INFINITY, 50).unwrap(),
        100_000,
        RngStream::root(8),
        Some(2.0),
        10.0,
    )
    .unwrap();
    let heuristic = 50f64.ln() / (2.0 * 50f64.ln()).sqrt();
    assert!((r.ratio / heuristic - 1.0).abs() < 0.2, "{} vs {heuristic}", r.ratio);
}

#[test]
fn corollary_steps_cube_and_ball() {
    for n in [3, 8] {
        for body in [BodySpec::isotropic_cube(n).unwrap(), BodySpec::isotropic_ball(n).unwrap()] {
            let r = corollary_checks(&body, 50_000, RngStream::root(n as u64), 1.0, 0.01).unwrap();
            assert!(r.quarter_holds && r.polar_holds, "{} n={n}: {r:?}", body.name);
            assert!(r.square_norm_mean.within(n as f64, 4.0));
            assert!(r.mean_width.as_ref().unwrap().lhs > 0.0);
        }
    }
    // cube, n = 8: E max|X_i| / sqrt 3 = E max of 8 uniforms on [0, 1] = 8/9
    let r = corollary_checks(&BodySpec::isotropic_cube(8).unwrap(), 50_000, RngStream::root(30), 1.0, 0.01).unwrap();
    assert!(r.gauge_mean.within(8.0 / 9.0, 4.0), "{:?}", r.gauge_mean);
    // ball, n = 3: E‖X‖_{K°} = r E|X| = (n + 2) n / (n + 1)
    let r = corollary_checks(&BodySpec::isotropic_ball(3).unwrap(), 50_000, RngStream::root(31), 1.0, 0.01).unwrap();
    assert!(r.polar_mean.within(15.0 / 4.0, 4.0), "{:?}", r.polar_mean);
}
