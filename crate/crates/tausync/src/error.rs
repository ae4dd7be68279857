use thiserror::Error;

/// Errors reported by every fallible operation of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Input data violates a precondition (for example a symbol outside the alphabet).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A bit stream could not be decoded.
    #[error("decode error at bit {offset}: {msg}")]
    Decode { offset: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn decode_err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Decode {
        offset,
        msg: msg.into(),
    })
}
