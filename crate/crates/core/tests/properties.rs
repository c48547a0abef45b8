use proptest::prelude::*;

use stoloc_core::geometry::{NormKind, NormSpec};
use stoloc_core::linalg::min_eigenvalue;
use stoloc_core::localization::{LocalizationConfig, Localizer};
use stoloc_core::measures::{isotropize, measure_moments, t2_distance, DiscreteMeasure, ThirdMomentAccumulator};

fn vec_in(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

fn measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((vec_in(dim), 0.05..1.0f64), 1..=max_atoms).prop_filter_map("distinct atoms", |pairs| {
        let (atoms, masses): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        DiscreteMeasure::normalized(atoms, masses).ok()
    })
}

fn specs(n: usize) -> Vec<NormSpec> {
    let mut out = vec![
        NormSpec::lp(1.0, n).unwrap(),
        NormSpec::lp(2.0, n).unwrap(),
        NormSpec::lp(3.5, n).unwrap(),
        NormSpec::lp(f64::INFINITY, n).unwrap(),
        NormSpec::new(NormKind::WeightedLp { p: 1.5, weights: (1..=n).map(|i| i as f64).collect() }, n).unwrap(),
        NormSpec::cube_facets(n).unwrap(),
        NormSpec::cross_polytope_vertices(n).unwrap(),
    ];
    let matrix: Vec<f64> = (0..n * n).map(|k| if k % (n + 1) == 0 { 2.0 } else { 0.3 }).collect();
    out.push(NormSpec::new(NormKind::LinearMap { rows: n, matrix }, n).unwrap());
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gauge_homogeneous_and_subadditive(x in vec_in(3), y in vec_in(3), lambda in 0.01..50.0f64) {
        for spec in specs(3) {
            let gx = spec.gauge(&x).unwrap();
            let gy = spec.gauge(&y).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let tol = 1e-10 * (1.0 + lambda * gx);
            prop_assert!((spec.gauge(&scaled).unwrap() - lambda * gx).abs() <= tol.max(1e-9 * lambda * gx), "{}", spec.name());
            prop_assert!(spec.gauge(&sum).unwrap() <= gx + gy + 1e-9 * (1.0 + gx + gy), "{}", spec.name());
        }
    }

    #[test]
    fn polar_duality(x in vec_in(4), y in vec_in(4)) {
        for spec in specs(4) {
            let polar = spec.polar().unwrap();
            let bound = spec.gauge(&x).unwrap() * polar.gauge(&y).unwrap();
            prop_assert!(dot(&x, &y) <= bound + 1e-9 * (1.0 + bound.abs()), "{}", spec.name());
        }
    }

    #[test]
    fn holder_equality_on_aligned_inputs(x in vec_in(4), p in 1.2..6.0f64) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let spec = NormSpec::lp(p, 4).unwrap();
        let q = p / (p - 1.0);
        // y_i = sign(x_i)|x_i|^{p-1} attains <x, y> = ‖x‖_p ‖y‖_q
        let y: Vec<f64> = x.iter().map(|v| v.signum() * v.abs().powf(p - 1.0)).collect();
        let rhs = spec.gauge(&x).unwrap() * NormSpec::lp(q, 4).unwrap().gauge(&y).unwrap();
        prop_assert!((dot(&x, &y) - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn isotropize_is_idempotent(m in measure(2, 7)) {
        let Ok(once) = isotropize(&m) else { return Ok(()) };
        let mom = measure_moments(&once, 2).unwrap();
        prop_assert!(mom.mean.amax() < 1e-8);
        prop_assert!((mom.covariance - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-8);
        let twice = isotropize(&once).unwrap();
        prop_assert_eq!(once.len(), twice.len());
        for i in 0..once.len() {
            for k in 0..2 {
                prop_assert!((once.atom(i)[k] - twice.atom(i)[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transport_triangle_inequality(a in measure(2, 10), b in measure(2, 10), c in measure(2, 10)) {
        let ab = t2_distance(&a, &b).unwrap().sqrt();
        let bc = t2_distance(&b, &c).unwrap().sqrt();
        let ac = t2_distance(&a, &c).unwrap().sqrt();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((t2_distance(&a, &b).unwrap() - t2_distance(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!(t2_distance(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tau_matrix_symmetric_psd(pts in prop::collection::vec(vec_in(3), 2..40)) {
        let mut acc = ThirdMomentAccumulator::new(3);
        pts.iter().for_each(|p| acc.push(p));
        let t = acc.finish();
        prop_assert!(t.asymmetry() <= 1e-12);
        let m = t.pair_contraction();
        let scale = m.amax().max(1.0);
        prop_assert!((&m - m.transpose()).amax() <= 1e-10 * scale);
        prop_assert!(min_eigenvalue(&m) >= -1e-10 * scale);
    }

    #[test]
    fn step_invariants(m in measure(2, 6), dws in prop::collection::vec(vec_in(2), 1..30)) {
        let loc = Localizer::new(&m, LocalizationConfig::default()).unwrap();
        let mut st = loc.init();
        for dw in dws {
            let dw: Vec<f64> = dw.iter().map(|v| v * 0.01).collect();
            let next = loc.step(&st, 1e-3, &dw).unwrap();
            let total: f64 = next.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(min_eigenvalue(&next.cov) >= -1e-10);
            prop_assert!(min_eigenvalue(&(&next.qv_accum - &st.qv_accum)) >= -1e-12);
            prop_assert!(min_eigenvalue(&(&next.b_accum - &st.b_accum)) >= -1e-9);
            let w = next.weights();
            let exact = measure_moments(&DiscreteMeasure::new(
                (0..loc.measure().len()).map(|i| loc.measure().atom(i).to_vec()).collect(),
                w.iter().map(|v| v / total).collect(),
            ).unwrap(), 2).unwrap();
            prop_assert!((&exact.mean - &next.mean).amax() < 1e-8);
            prop_assert!((&exact.covariance - &next.cov).amax() < 1e-8);
            st = next;
        }
    }
}
