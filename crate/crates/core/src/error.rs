use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A simulation hit its size cap. `partial` is the number of nodes,
    /// events or extrema produced before stopping.
    #[error("cap of {cap} exceeded after {partial} items")]
    CapExceeded { cap: usize, partial: usize },

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("malformed height path at extremum {index}: {reason}")]
    MalformedPath { index: usize, reason: String },

    #[error("invalid point set: {0}")]
    InvalidPoints(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {value}")))
    }
}
