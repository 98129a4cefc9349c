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

    /// Malformed document. `line`/`column` are 1-based positions reported by the JSON reader.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid trace{}: {reason}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    InvalidTrace { frame: Option<usize>, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trace too short: {frames} frames, at least {required} required")]
    TraceTooShort { frames: usize, required: usize },

    #[error("series of length {len} is shorter than the filter window {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("segment has {samples} samples, a degree-{degree} fit needs at least {}", degree + 1)]
    SegmentTooShort { samples: usize, degree: usize },

    #[error("dataset needs at least {required} segments, got {got}")]
    DatasetTooSmall { got: usize, required: usize },

    #[error("k = {k} out of range for a dataset of {n} segments")]
    KOutOfRange { k: usize, n: usize },

    #[error("segment id {0} does not exist")]
    UnknownSegment(usize),

    #[error("occurrence counts are empty")]
    EmptyCounts,

    #[error("ground-truth segment has zero length")]
    ZeroLengthTruth,

    #[error("action `{0}` has no occurrence in the dataset")]
    MissingAction(String),

    #[error("trace {0} has no annotations")]
    Unannotated(String),

    #[error("unexecutable script at step {step}: {reason}")]
    UnexecutableScript { step: usize, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid_trace(frame: Option<usize>, reason: impl Into<String>) -> Self {
        Error::InvalidTrace {
            frame,
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
