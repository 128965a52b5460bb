use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("instance has {n} spins, above the exhaustive-search ceiling of {ceiling}")]
    InstanceTooLarge { n: usize, ceiling: usize },

    #[error("weight {value} at index {index} outside [0, {max}]")]
    EncodingRange { index: usize, value: u64, max: u64 },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("numerical divergence at step {step}")]
    NumericalDivergence { step: u64 },

    #[error("ingest failed: {0}")]
    Ingest(String),

    #[error("no usable rows left after cleaning")]
    EmptyData,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
