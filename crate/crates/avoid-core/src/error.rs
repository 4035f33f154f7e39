use thiserror::Error;

/// Library error type. `Precondition` and `TooLarge` map to CLI exit code 2
/// (refusal), everything else to exit code 1.
#[derive(Debug, Error)]
pub enum AvoidError {
    #[error("distance set must be non-empty")]
    EmptyDistanceSet,

    #[error("distance values must be strictly positive and strictly increasing")]
    BadDistanceValues,

    #[error("operation requires an integer-mode distance set")]
    NotIntegerMode,

    #[error("grid resolution must be at least 1")]
    ZeroResolution,

    #[error("torus period must be positive")]
    BadPeriod,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver limit exceeded after {visited} nodes (instance size {n})")]
    SolverLimit { n: usize, visited: u64 },

    #[error("grid misalignment: {0}")]
    Misaligned(String),

    #[error("refusing oversized computation: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, AvoidError>;
