//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, parsing, simulation and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// A slice or vector had the wrong length for the object it was paired with.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violated a documented precondition (negative rate, empty name, ...).
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// Lexical or syntactic error in a model source file.
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },

    /// The source parsed but is not a well-formed model (unknown identifier,
    /// parametric guard, negative rate expression, unreachable bound, ...).
    #[error("model error: {0}")]
    Semantic(String),

    /// Dataset file did not match the expected line-delimited format.
    #[error("dataset format error at line {line}: {msg}")]
    DatasetFormat { line: usize, msg: String },

    /// Estimation could not proceed (zero-likelihood sequence, bad configuration).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A mandatory internal numerical check failed; results would be unreliable.
    #[error("numerical check failed: {0}")]
    Numerical(String),

    /// Root finding failed to locate a positive root.
    #[error("root finding failed: {0}")]
    NoRoot(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn semantic(msg: impl Into<String>) -> Self {
        Error::Semantic(msg.into())
    }
}
