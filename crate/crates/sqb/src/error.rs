//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid {name}: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("dense Hessian oracle is limited to dim <= {limit}, got dim = {dim}")]
    DenseLimitExceeded { dim: usize, limit: usize },

    #[error("example {example}: outcome {outcome} has negative measure {value}")]
    NegativeMeasure {
        example: usize,
        outcome: usize,
        value: f64,
    },

    #[error("example {example}: every outcome has zero measure")]
    AllMeasuresZero { example: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty test set")]
    EmptyTestSet,

    #[error("dataset contains no rows")]
    EmptyDataset,

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(
        "reference solve stopped after {iterations} iterations with gradient norm \
         {achieved:.3e} (target {target:.1e})"
    )]
    ReferenceDidNotConverge {
        iterations: u64,
        achieved: f64,
        target: f64,
    },

    /// A step produced NaN or infinity; the message carries a dump of the
    /// optimizer state at the point of failure.
    #[error("non-finite {quantity} at iteration {iteration}; state: {state_dump}")]
    NonFinite {
        quantity: &'static str,
        iteration: u64,
        state_dump: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }
}
