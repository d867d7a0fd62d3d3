use thiserror::Error;

use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or engine parameter violates one of its invariants.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An internal numerical check (orthogonality, Hermiticity, ...) failed.
    #[error("precision loss in {what}: deviation {deviation:.3e} exceeds tolerance {tolerance:.1e}")]
    Precision {
        what: String,
        deviation: f64,
        tolerance: f64,
    },

    /// The requested problem does not fit the configured memory budget.
    #[error("dimension {dimension} exceeds budget {budget}; {suggestion}")]
    Resource {
        dimension: usize,
        budget: usize,
        suggestion: String,
    },

    /// An iterative procedure did not converge; `trace` holds its history.
    #[error("{what} did not converge after {iterations} iterations")]
    Convergence {
        what: String,
        iterations: usize,
        trace: Vec<f64>,
    },

    /// Bond dimension saturated with discarded weight above budget. The
    /// observables recorded up to the failure are kept in `partial`.
    #[error("truncation budget exceeded: discarded weight {discarded:.3e} > {budget:.1e} at t = {time:.4}")]
    TruncationBudget {
        discarded: f64,
        budget: f64,
        time: f64,
        partial: Box<TimeSeries>,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
