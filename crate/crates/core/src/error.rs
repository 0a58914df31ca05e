use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error(
        "Fock truncation failure in mode {mode}: top-level population {population:.3e} \
         exceeds {limit:.1e} at t = {time}; increase the cutoff of that mode"
    )]
    Truncation {
        mode: usize,
        population: f64,
        limit: f64,
        time: f64,
    },

    #[error("Hilbert space dimension {dimension} exceeds the configured maximum {limit}")]
    DimensionTooLarge { dimension: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
