//! Stochastic localization on discrete measures, together with the estimators
//! and convex-geometry functionals used to study thin-shell type constants.

pub mod constants;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod measures;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{BodySpec, NormSpec};
pub use localization::{LocalizationState, Localizer, PathTrace, StoppingRule};
pub use measures::{DiscreteMeasure, DistributionFamily, GridMeasure, MomentSummary};
pub use rng::RngStream;
pub use stats::EstimatorReport;
