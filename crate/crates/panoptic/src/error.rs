use std::path::PathBuf;

use thiserror::Error;

/// Process exit code for an input-set problem (missing pairs, no images).
pub const EXIT_INPUT_SET: i32 = 2;
/// Process exit code for a decode or schema problem.
pub const EXIT_DECODE: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: invalid PNG: {message}")]
    Png { context: String, message: String },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}: {message}")]
    Schema { context: String, message: String },
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: panoptic_core::model::ModelError,
    },
    #[error("no images found in {0}")]
    NoImages(PathBuf),
    #[error("unmatched images: {}", .0.join(", "))]
    UnmatchedImages(Vec<String>),
    #[error("{context}: {message}")]
    Compute { context: String, message: String },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoImages(_) | Error::UnmatchedImages(_) => EXIT_INPUT_SET,
            _ => EXIT_DECODE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Schema {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
