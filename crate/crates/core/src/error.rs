use std::io;

/// Errors shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),
    /// The data handed to an operation violates its precondition.
    #[error("invalid input: {0}")]
    Input(String),
    /// A shard record could not be parsed or failed validation.
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("training error: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
