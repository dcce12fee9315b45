use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two vectors that must share a dimension did not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The ascent produced a non-finite value.
    #[error("solver diverged at iteration {iteration}: {detail}")]
    SolverDiverged { iteration: usize, detail: String },

    /// Every agent sent an empty message.
    #[error("no critical samples received")]
    NoCriticalSamples,

    /// A data file could not be parsed.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
