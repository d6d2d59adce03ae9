use std::io;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants map onto the CLI exit-code contract: configuration, data,
/// parse and I/O failures exit with 1, invariant violations exit with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("training error: {0}")]
    Training(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Prefixes the message with `ctx`, keeping the error class.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::Parse { line, msg } => Error::Parse { line, msg: format!("{ctx}: {msg}") },
            Error::Training(m) => Error::Training(format!("{ctx}: {m}")),
            Error::Invariant(m) => Error::Invariant(format!("{ctx}: {m}")),
            Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{ctx}: {e}"))),
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
