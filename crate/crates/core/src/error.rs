//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A CSV cell failed to parse. Row and column are 1-based over data rows.
    #[error("parse error at row {row}, column {col}: {reason}")]
    Parse {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("inconsistent dimension: row {row} has {got} columns, expected {expected}")]
    InconsistentDimension {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate chord: endpoints coincide")]
    DegenerateChord,

    #[error("degenerate direction: zero-length vector")]
    DegenerateDirection,

    #[error("bad dataset spec: {0}")]
    SpecParse(String),

    #[error("bad trajectory file: {0}")]
    TrajectoryFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
