use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unresolvable shells: {0}")]
    Unresolvable(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("operator inversion failed: {0}")]
    Inversion(String),
    #[error("iteration failed at step {step}: {reason}")]
    Iteration { step: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
