use stoloc_core::constants::{
    catalog_tau, estimate_sigma, estimate_tau, restricted_norm_expectation, tau_from_samples, Event,
};
use stoloc_core::geometry::NormSpec;
use stoloc_core::measures::{DistributionFamily, PointCloud};
use stoloc_core::rng::RngStream;
use stoloc_core::stats::{chi_variance, simpson};

/// Brute-force sup over a grid of the sphere of Σ_ij (Σ_k T_ijk θ_k)² for the
/// tensor T_ijk = 2·[i = j = k], i.e. 4 Σ θ_k⁴.
fn sphere_grid_max_2d() -> f64 {
    (0..20_000)
        .map(|k| {
            let a = k as f64 / 20_000.0 * std::f64::consts::TAU;
            4.0 * (a.cos().powi(4) + a.sin().powi(4))
        })
        .fold(0.0, f64::max)
}

#[test]
fn exponential_third_moment_oracle() {
    // E (E - 1)^3 for E ~ Exp(1)
    let m3 = simpson(|x| (x - 1.0).powi(3) * (-x).exp(), 0.0, 60.0, 60_000);
    assert!((m3 - 2.0).abs() < 1e-8);
    assert!((sphere_grid_max_2d().sqrt() - 2.0).abs() < 1e-9);
}

#[test]
fn sigma_gaussian_closed_forms() {
    for (n, seed) in [(1, 1), (2, 2), (8, 3)] {
        let est = estimate_sigma(&DistributionFamily::gaussian(n), 100_000, RngStream::root(seed)).unwrap();
        let target = chi_variance(n);
        assert!(est.within_intervals(target, 3.0), "n={n}: {} vs {target}, ci {:?}", est.variance, est.ci);
    }
}

#[test]
fn sigma_delta_method_values() {
    let cube = estimate_sigma(&DistributionFamily::cube(10), 100_000, RngStream::root(4)).unwrap();
    assert!((cube.variance / 0.2 - 1.0).abs() < 0.25, "{}", cube.variance);
    let exp = estimate_sigma(&DistributionFamily::exponential(50), 100_000, RngStream::root(5)).unwrap();
    assert!((exp.variance / 2.0 - 1.0).abs() < 0.25, "{}", exp.variance);
}

#[test]
fn tau_exponential_is_two() {
    for n in [2, 10, 50] {
        let est = estimate_tau(&DistributionFamily::exponential(n), 100_000, RngStream::root(n as u64)).unwrap();
        assert!((est.tau / 2.0 - 1.0).abs() < 0.1, "n={n}: {}", est.tau);
        let norm: f64 = est.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-10);
    }
}

#[test]
fn tau_vanishes_for_symmetric_families() {
    let g = estimate_tau(&DistributionFamily::gaussian(5), 1_000_000, RngStream::root(6)).unwrap();
    assert!(g.tau <= 0.05, "{}", g.tau);
    let c = estimate_tau(&DistributionFamily::cube(5), 1_000_000, RngStream::root(7)).unwrap();
    assert!(c.tau <= 0.05, "{}", c.tau);
}

#[test]
fn tau_is_basis_free() {
    let n = 3;
    let pts = DistributionFamily::exponential(n).sample(100_000, RngStream::root(8)).unwrap();
    // rotation by a fixed orthogonal matrix (QR of a deterministic matrix)
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 + if i == j { 2.0 } else { 0.0 });
    let q = a.qr().q();
    let rotated = pts.map_points(|x, out| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|c| q[(r, c)] * x[c]).sum();
        }
    });
    let t1 = tau_from_samples(&pts, 8).unwrap();
    let t2 = tau_from_samples(&rotated, 8).unwrap();
    assert!((t1.tau - t2.tau).abs() <= 2.0 * t1.std_error, "{} vs {}", t1.tau, t2.tau);
    assert!((t1.tau - t2.tau).abs() < 1e-9);
}

#[test]
fn tau_shrinks_like_inverse_root_n() {
    let mut last = f64::INFINITY;
    for (k, samples) in [10_000, 100_000, 1_000_000].into_iter().enumerate() {
        let t = estimate_tau(&DistributionFamily::gaussian(3), samples, RngStream::root(20 + k as u64)).unwrap();
        // τ̂ of a symmetric law is pure sampling noise of order 1/sqrt(N)
        assert!(t.tau * (samples as f64).sqrt() < 20.0, "N={samples}: {}", t.tau);
        assert!(t.tau < last * 1.2);
        last = t.tau;
    }
}

#[test]
fn restricted_ratio_bounded_over_catalog() {
    for fam in stoloc_core::constants::log_concave_catalog(3) {
        for norm in ["l1", "l2", "linf"] {
            for event in [Event::NormAbove { r: 2.0 }, Event::FirstAbove { r: 1.0 }] {
                let r = restricted_norm_expectation(&fam, &NormSpec::from_name(norm, 3).unwrap(), event, 20_000, RngStream::root(9)).unwrap();
                assert!(r.ratio > 0.0 && r.ratio <= 10.0, "{} {norm} {event:?}: {}", fam.name(), r.ratio);
            }
        }
    }
}

#[test]
fn catalog_max_is_labeled_lower_bound() {
    let b = catalog_tau(3, 20_000, RngStream::root(10)).unwrap();
    assert_eq!(b.per_family.len(), 4);
    assert!(b.lower_bound >= b.per_family.iter().map(|p| p.1).fold(0.0, f64::max));
    assert!(b.note.contains("lower bound"));
}

#[test]
fn fixed_sample_tau_matches_streaming() {
    let fam = DistributionFamily::exponential(2);
    let pts: PointCloud = fam.sample(10_000, RngStream::root(11)).unwrap();
    let a = tau_from_samples(&pts, 11).unwrap();
    let b = estimate_tau(&fam, 10_000, RngStream::root(11)).unwrap();
    assert!((a.tau - b.tau).abs() < 1e-10);
}
