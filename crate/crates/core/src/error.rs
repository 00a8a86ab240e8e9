use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension {d} not supported here: {reason}")]
    UnsupportedDimension { d: usize, reason: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("horizon {0} is not a power of two")]
    NotDyadic(u64),

    #[error("exhaustive enumeration of {paths} paths exceeds the limit of {limit}")]
    EnumerationTooLarge { paths: u128, limit: u128 },

    #[error("log-Laplace transform diverges at t = {t}")]
    Divergent { t: f64 },

    #[error("importance weights have infinite variance: {0}")]
    DegenerateWeights(String),

    #[error("splitting population went extinct at level {level}")]
    Extinction { level: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("fit rejected: {0}")]
    BadFit(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
