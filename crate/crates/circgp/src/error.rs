//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

/// Errors produced by data handling, model fitting, and prediction.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument was NaN or infinite.
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    /// Direction of the zero vector is undefined.
    #[error("direction undefined at the origin (0, 0)")]
    OriginDirection,

    /// An operation that needs at least one element got none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Mean direction of a sample with zero resultant length is undefined.
    #[error("mean direction undefined: resultant length is zero")]
    ZeroResultant,

    /// Two related arguments disagree in length.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix not positive definite: factorization failed at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    /// A numeric routine left its domain (overflow, divergence, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid or malformed input data.
    #[error("data error: {0}")]
    Data(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems (bad
    /// config, bad data, bad arguments), 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite { .. } | Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
