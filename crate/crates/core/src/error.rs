use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An iterative routine failed to converge.
    #[error("numerical failure at taper {index}: {reason}")]
    Numerical { index: usize, reason: String },

    /// A configuration violates a standing assumption of an algorithm.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A bound or statistic does not apply to the given inputs.
    #[error("not applicable: {0}")]
    Inapplicable(String),

    /// Malformed input data.
    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
