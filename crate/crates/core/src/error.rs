use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("placement infeasible: gave up after {attempts} attempts with {placed} of {requested} items placed")]
    PlacementInfeasible {
        attempts: usize,
        placed: usize,
        requested: usize,
    },
    #[error("unknown archetype `{0}`")]
    UnknownArchetype(String),
    #[error("item {0} not found on plate")]
    ItemNotFound(u32),
    #[error("invalid start pose: {0}")]
    InvalidStart(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("box contains no item pixels")]
    NoItem,
    #[error("servo target lost")]
    TargetLost,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input modality: {0}")]
    MissingModality(&'static str),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnknownArchetype(_)
                | Error::Config(_)
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::Mode(_)
                | Error::Checkpoint(_)
        )
    }
}
