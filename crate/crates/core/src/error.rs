//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("arithmetic overflow computing dimension count for d={d}, n={n}")]
    DimensionOverflow { d: usize, n: u32 },

    #[error("coefficient vector has length {got}, shape requires {expected}")]
    CoefficientLength { got: usize, expected: usize },

    #[error("non-finite value at coefficient index {index}")]
    NonFiniteCoefficient { index: usize },

    #[error("potential is constant; {0}")]
    ConstantPotential(String),

    #[error("found {found} critical points, need at least 2")]
    TooFewCriticalPoints { found: usize },

    #[error("invalid Cartan query: {0}")]
    InvalidQuery(String),

    #[error("sampler requested {got} samples, minimum is {min}")]
    InsufficientSamples { got: u64, min: u64 },

    #[error("truncation size {l} is below the minimum of 2")]
    TruncationTooSmall { l: usize },

    #[error("gap detection needs at least 2 eigenvalues, got {got}")]
    TooFewEigenvalues { got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed coefficient file: {0}")]
    Json(#[from] serde_json::Error),
}
