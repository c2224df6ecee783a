use thiserror::Error;

/// Errors raised by the optimization library and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stationarity-unavailable: problem has no analytic y* and the approximate solver is disabled")]
    StationarityUnavailable,

    #[error("inner-oracle-nonconvergent: y* approximation did not reach tolerance {tol} within {cap} iterations")]
    InnerOracleNonconvergent { tol: f64, cap: usize },

    #[error("shape-error: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("compact-domain-required: regret needs a bounded comparator domain")]
    CompactDomainRequired,

    #[error("log-domain-error: {0}")]
    LogDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
