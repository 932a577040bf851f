use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A trajectory produced a non-finite position, momentum, or energy.
    /// Callers treat the proposal as rejected (acceptance probability 0).
    #[error("trajectory blow-up at step {step}: non-finite state")]
    BlowUp { step: usize },

    #[error("{0} does not support exact sampling")]
    ExactSamplingUnsupported(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("tuner failure: {0}")]
    Tuner(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
