use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum HyveError {
    /// Tensor shapes that cannot be combined.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A primitive produced NaN or infinity.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Caller-supplied data violates a precondition.
    #[error("input error: {0}")]
    Input(String),
    /// An operation was invoked in a state it does not support.
    #[error("contract error: {0}")]
    Contract(String),
    /// A mathematical function evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An invalid model or training configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed file contents; `position` locates the defect.
    #[error("format error at {position}: {message}")]
    Format { position: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HyveError {
    pub(crate) fn format(position: impl Into<String>, message: impl Into<String>) -> Self {
        HyveError::Format {
            position: position.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = HyveError> = std::result::Result<T, E>;
