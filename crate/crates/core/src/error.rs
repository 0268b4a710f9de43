//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error at {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset container error: {0}")]
    Container(#[from] hdf5::Error),

    #[error("variable {0:?} not present in dataset")]
    MissingVariable(String),

    #[error("requested window {requested} is not covered by the file extent {available}")]
    WindowOutsideExtent { requested: String, available: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: String, got: String },

    #[error("degenerate channel {0}: min equals max, cannot normalize")]
    DegenerateChannel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("noise schedule construction failed: {0}")]
    ScheduleConstruction(String),

    #[error("numerical failure{}: {context}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NumericalFailure { step: Option<usize>, context: String },

    #[error("cannot split dataset: {0}")]
    CannotSplit(String),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
