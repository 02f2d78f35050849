use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not line up for the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Arguments are well-formed but semantically unusable (empty sets,
    /// labels out of range, too few points for k clusters, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A data file could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// A training loss became NaN or infinite.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    /// A model container failed validation.
    #[error("corrupt model container: {0}")]
    CorruptContainer(String),

    /// A container is valid but lacks a section the caller needs.
    #[error("model container has no `{0}` section")]
    MissingSection(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
