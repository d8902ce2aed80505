use alloc::string::String;

/// Errors raised by the sampler core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is not symmetric (|a[{row}][{col}] - a[{col}][{row}]| too large)")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered while evaluating {0}")]
    NonFiniteValue(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("no converged optimizer result to merge")]
    EmptyCandidates,
    #[error("chain aborted at iteration {iteration} in mode {mode}: {message}")]
    ChainAborted {
        iteration: u64,
        mode: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
