use thiserror::Error;

/// Errors raised by the SDL toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdlError {
    /// Malformed input: bad shapes, out-of-range arguments, infeasible starts.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Overflow, non-finite values or an iteration that failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl SdlError {
    pub fn argument(msg: impl Into<String>) -> Self {
        SdlError::Argument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SdlError::Numeric(msg.into())
    }
}

impl From<std::io::Error> for SdlError {
    fn from(e: std::io::Error) -> Self {
        SdlError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SdlError>;
