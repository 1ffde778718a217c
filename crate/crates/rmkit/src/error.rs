use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The requested quantity is undefined for the given parameters.
    #[error("undefined: {0}")]
    Undefined(String),
    /// An iterative numerical routine failed to converge.
    #[error("numerical routine did not converge: {0}")]
    NoConvergence(String),
    /// A computation produced or encountered a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// An operation was asked to work on empty data.
    #[error("empty input: {0}")]
    Empty(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
