//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or point lies outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An index (degree, fiber index, harmonic index) is out of range.
    #[error("index out of range: {0}")]
    Index(String),
    /// The requested combination of parameters is not implemented.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    /// A numerical procedure failed (non-convergence, NaN, inconsistent result).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// An integral defining the requested quantity is infinite.
    #[error("divergent: {0}")]
    Divergent(String),
    /// A configured resource cap would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
