use std::path::PathBuf;

use thiserror::Error;

/// Position of a record inside a dataset: episode and in-episode step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Locator {
    pub episode: usize,
    pub step: usize,
}

impl std::fmt::Display for Locator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "episode {} step {}", self.episode, self.step)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant `{check}` violated at {at}: {detail}")]
    Invariant {
        check: &'static str,
        at: String,
        detail: String,
    },

    #[error("record {index}: {detail}")]
    Record { index: usize, detail: String },

    #[error("dataset has no episodes")]
    EmptyDataset,

    #[error("episode is empty")]
    EmptyEpisode,

    #[error(
        "dataset is score-degenerate under {criterion}: no episode scores strictly above the \
         dataset mean {mean}, so no filtered dataset exists"
    )]
    Degenerate { criterion: String, mean: f64 },

    #[error("filter report does not belong to this dataset: {0}")]
    ReportMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
