use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: missing field `{field}` for {task} record")]
    MissingField {
        path: PathBuf,
        line: usize,
        field: &'static str,
        task: String,
    },

    #[error("{0}: file contains no records")]
    EmptyFile(PathBuf),

    #[error("invalid corpus: {0}")]
    Corpus(String),

    #[error("word vectors: {0}")]
    Vectors(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error("key mismatch: {0}")]
    KeyMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config/validation, 3 data, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
