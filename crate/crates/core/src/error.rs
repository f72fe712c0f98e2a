use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {layer}: expected {expected}, got {actual}")]
    Shape {
        layer: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: String },

    #[error("non-finite {loss} at batch {batch}")]
    Divergence { batch: usize, loss: &'static str },

    #[error("checkpoint format version mismatch: file has {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("parse error in {path} at byte offset {offset}: {reason}")]
    Parse { path: PathBuf, offset: u64, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn shape(layer: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            layer: layer.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
