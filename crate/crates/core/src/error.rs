use thiserror::Error;

/// Errors raised by the library.
///
/// The variants mirror the failure classes the command line maps to exit
/// codes: bad input (`Parameter`, `Domain`, `Hypothesis`), numerical
/// impossibility (`Divergent`, `Resolution`, `Model`) and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("grid resolution error: {0}")]
    Resolution(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn parameter<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
