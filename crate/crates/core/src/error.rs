use thiserror::Error;

/// Errors produced by the bandwidth selection library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (h <= 0, m > n, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to converge or produced no finite value.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Invalid configuration (unknown preset, inconsistent options).
    #[error("configuration error: {0}")]
    Config(String),
    /// Every candidate mixture fit failed.
    #[error("mixture fit failed: {0}")]
    Fit(String),
    /// Pilot estimation of the optimal subsample size failed.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// Malformed input data.
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numerical(msg.into()))
}
