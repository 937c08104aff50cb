use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (frame mismatch, bad dimensions, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The scene or scenario cannot be evaluated as described.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// An iterative numeric procedure failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed input data; `location` names a line, byte offset or field path.
    #[error("parse error in {source_name} at {location}: {message}")]
    Parse { source_name: String, location: String, message: String },

    /// Invalid scenario configuration.
    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        Error::Scenario(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    pub fn parse(source_name: impl Into<String>, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { source_name: source_name.into(), location: location.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
