use thiserror::Error;

/// Errors surfaced by every layer of the solver stack.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {message}")]
    NumericFailure {
        message: String,
        /// Parameter vector at which the failure was observed, when known.
        theta: Option<Vec<f64>>,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            theta: None,
        }
    }

    pub(crate) fn numeric_at(msg: impl Into<String>, theta: &[f64]) -> Self {
        Error::NumericFailure {
            message: msg.into(),
            theta: Some(theta.to_vec()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
