use thiserror::Error;

/// Errors raised by the grid model, the operators and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` out of range: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("grid of {cells} cells exceeds the oracle cap of {cap}")]
    Size { cells: usize, cap: usize },

    #[error("window [{lo}, {hi}] does not fit a grid of {cells} cells")]
    WindowOutOfGrid { lo: usize, hi: usize, cells: usize },

    #[error("shape mismatch: {left} vs {right} cells")]
    Shape { left: usize, right: usize },

    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
