use thiserror::Error;

use crate::localization::PathTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Unknown identifier or invalid parameter combination.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed data: wrong dimension, non-finite values, too few samples.
    #[error("input error: {0}")]
    Input(String),
    #[error("degenerate measure: {0}")]
    Degenerate(String),
    /// The request is valid but outside what the exact solvers handle.
    #[error("capability error: {0}")]
    Capability(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// Step budget exhausted; carries whatever was simulated so far.
    #[error("step budget of {budget} exceeded at t = {}", trace.stop_time)]
    Truncated { budget: usize, trace: Box<PathTrace> },
}

impl Error {
    /// Coarse category used for process exit codes.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Input(_) | Error::Precondition(_))
    }
}
