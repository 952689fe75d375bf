//! Error and result types shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the public API.
#[derive(Debug)]
pub enum Error {
    /// Matrix, layer, or mask dimensions do not line up.
    Shape(String),
    /// Invalid configuration or hyperparameter value.
    Config(String),
    /// Invalid runtime input (e.g. a label outside the class range).
    Input(String),
    /// Malformed binary or dataset file; `offset` is the byte position
    /// at which parsing failed.
    Format { offset: u64, message: String },
    /// Arithmetic misuse such as division by a zero count.
    Arithmetic(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            Error::Arithmetic(msg) => write!(f, "arithmetic error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
