//! Gauges, polars, mean widths and the norm-comparison experiments.

mod body;
mod experiments;
mod norm;
mod widths;

pub use body::{isotropic_constant, BodySpec};
pub use experiments::{compare_norms_experiment, corollary_checks, CompareReport, CorollaryReport, Sides};
pub use norm::{NormKind, NormSpec, MAX_POLYTOPE_SIZE};
pub use widths::{
    c_n, gaussian_norm_expectation, gaussian_norm_monte_carlo, mean_width_m, mean_width_mstar, width_report,
    WidthReport, MIN_WIDTH_SAMPLES,
};
