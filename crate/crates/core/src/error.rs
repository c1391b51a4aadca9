//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by quantization, statistics tracking, probing and
/// document I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),

    #[error("insufficient samples: need at least {needed}, have {got}")]
    InsufficientSamples { needed: u64, got: u64 },

    #[error("matrix of dim {dim} not positive definite after {attempts} jitter escalations")]
    NotPositiveDefinite { dim: usize, attempts: u32 },

    #[error("feature dimension {n} is not divisible by block size {block_size}")]
    IndivisibleFeatureDim { n: usize, block_size: usize },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("format version mismatch: expected {expected}, found {found}")]
    FormatVersionMismatch { expected: u32, found: u32 },

    #[error("corrupt snapshot/document: {0}")]
    CorruptSnapshot(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error("no plan entry for layer {layer:?}, direction {direction}")]
    MissingPlanEntry { layer: String, direction: String },

    #[error("invalid throughput table: {0}")]
    InvalidThroughputTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.into(),
            found: found.into(),
        }
    }
}
