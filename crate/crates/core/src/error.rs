use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Stream(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unbalanced '@' delimiter at byte offset {offset}")]
    UnbalancedDelimiter { offset: usize },

    #[error("movie {0} is not probe-eligible")]
    NotEligible(u32),

    #[error("unknown movie: {0}")]
    UnknownMovie(String),

    #[error("training diverged at epoch {epoch} (loss {loss}); try a smaller learning rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("export failure: {0}")]
    Export(String),

    #[error("invalid store: {0}")]
    Store(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
