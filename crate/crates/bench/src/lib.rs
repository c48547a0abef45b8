//! Fixtures shared by the benchmarks.

use stoloc_core::localization::{LocalizationConfig, Localizer};
use stoloc_core::measures::{discretize_density, DiscreteMeasure};

pub fn two_point() -> Localizer {
    Localizer::new(&DiscreteMeasure::two_point(0.5).unwrap(), LocalizationConfig::default()).unwrap()
}

/// Standard Gaussian on `[-6, 6]` with `cells` cells.
pub fn gaussian_grid(cells: usize) -> Localizer {
    let g = discretize_density(|x| -0.5 * x[0] * x[0], &[(-6.0, 6.0)], cells).unwrap();
    Localizer::from_grid(&g, LocalizationConfig::default()).unwrap()
}

/// `k` atoms spread on a circle, unequal weights.
pub fn circle_atoms(k: usize) -> DiscreteMeasure {
    let atoms = (0..k)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / k as f64;
            vec![a.cos(), a.sin()]
        })
        .collect();
    DiscreteMeasure::normalized(atoms, (1..=k).map(|i| i as f64).collect()).unwrap()
}
