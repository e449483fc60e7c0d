use thiserror::Error;

/// Errors raised by the evaluation, sampling and validation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("{what} = {value} exceeds the configured cap {cap}")]
    Cap { what: &'static str, value: usize, cap: usize },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("unsupported claim distribution: {0}")]
    UnsupportedDist(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }

    /// True for errors caused by bad input rather than by a numerical routine
    /// failing on valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Validation { .. } | Error::Cap { .. } | Error::UnsupportedDist(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
