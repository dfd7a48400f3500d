use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level-set gradient vanishes at {point:?} (|grad phi| = {norm:e})")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    #[error("{context} did not converge (residual {residual:e})")]
    NoConvergence { context: String, residual: f64 },

    #[error("unknown experiment or surface preset `{0}`")]
    UnknownExperiment(String),

    #[error("icosphere level {0} outside supported range 0..=8")]
    LevelOutOfRange(u32),

    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),

    #[error("index ({row}, {col}) out of range for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("conjugate gradient met a non-positive curvature direction (p^T A p = {0:e})")]
    IndefiniteDetected(f64),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("non-positive input value {0:e}")]
    NonPositiveInput(f64),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("mesh format error: {0}")]
    Format(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for configuration problems (as opposed to numerical failures).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation { .. } | Error::UnknownExperiment(_)
        )
    }
}
