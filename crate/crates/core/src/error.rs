//! Error type shared across the crate. Variants map onto process exit codes:
//! usage, config, validation, and parse failures exit 1; I/O and backend
//! failures exit 2.

use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("backend: {0}")]
    Backend(String),
}

impl Error {
    /// Exit code the process should use when this error reaches main.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Validation(_) | Error::Parse(_) => 1,
            Error::Io(_) | Error::Backend(_) => 2,
        }
    }

    /// I/O error annotated with the path it happened on.
    pub fn io(path: &Path, err: impl fmt::Display) -> Error {
        Error::Io(format!("{}: {}", path.display(), err))
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Error {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Error {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
