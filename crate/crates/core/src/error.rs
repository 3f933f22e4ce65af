use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty score")]
    EmptyScore,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("non-finite loss term `{0}`")]
    NonFinite(&'static str),

    #[error("non-finite loss term `{term}` at epoch {epoch}, iteration {iter}")]
    Diverged {
        term: &'static str,
        epoch: u32,
        iter: u32,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
