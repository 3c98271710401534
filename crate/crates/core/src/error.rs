use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regularization too coarse: {0}")]
    RegularizationTooCoarse(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("ambiguous threshold: {0}")]
    AmbiguousThreshold(String),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("meshing error: {0}")]
    Meshing(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("convergence failure after {iterations} iterations: {message}")]
    Convergence { iterations: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
