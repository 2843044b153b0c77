use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: malformed row: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
    #[error("row {row}: empty text")]
    EmptyText { row: usize },
    #[error("vocabulary is empty after min_df filtering")]
    EmptyVocabulary,
    #[error("DegenerateTraining: at least two distinct classes are required")]
    DegenerateTraining,
    #[error("sITFL header mismatch: {0}")]
    VersionMismatch(String),
    #[error("sITFL line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("head+tail baseline requires part1 + part2 == 1, got {part1} + {part2}")]
    InvalidSplit { part1: f64, part2: f64 },
    #[error("empty sITFL with a non-empty fill budget and no residual tokens")]
    EmptySitfl,
    #[error("strategy {0:?} requires an sITFL")]
    MissingSitfl(String),
    #[error("label {0:?} is not in the class list")]
    UnknownLabel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
