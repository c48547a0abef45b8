//! The localization SDE on discrete measures: single steps, stopped paths,
//! batches and the diagnostics built on them.

mod batch;
mod decay;
mod run;
mod state;
mod stopped;
mod tilt;

pub use batch::{AggregateReport, BatchOptions, BatchResult, SeedInfo, TerminalFrequencies};
pub use decay::{decay_diagnostic, DecayReport, MIN_DECAY_TRACES};
pub use run::{PathTrace, RunOptions, StopReason, StoppingRule, TraceRecord};
pub use state::{LocalizationConfig, LocalizationState, Localizer};
pub use stopped::{NormMeans, StoppedPath, StoppedReport};
