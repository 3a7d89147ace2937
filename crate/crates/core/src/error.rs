use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("time series needs at least 2 rows and 1 column, got {rows}x{cols}")]
    TooShort { rows: usize, cols: usize },

    #[error("time step must be finite and positive, got {0}")]
    BadStep(f64),

    #[error("multistep schemes support 1..=5 steps, got {0}")]
    UnsupportedSteps(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("need more than {steps} samples for a {steps}-step scheme, got {samples}")]
    InsufficientSamples { samples: usize, steps: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid layer dimensions {0:?}")]
    BadDims(Vec<usize>),

    #[error("loss became non-finite at iteration {iteration}")]
    DivergedLoss { iteration: usize },

    #[error("trajectories disagree on {what}: {first} vs {other}")]
    MixedDims {
        what: &'static str,
        first: f64,
        other: f64,
    },

    #[error("state became non-finite after row {last_finite}")]
    NonFiniteState { last_finite: usize },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-uniform time grid at row {row}")]
    NonUniformGrid { row: usize },

    #[error("file has no data rows")]
    EmptyFile,

    #[error("trajectories are on different grids")]
    GridMismatch,

    #[error("reference component {0} is identically zero")]
    ZeroReference(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "NonFinite",
            Error::TooShort { .. } => "TooShort",
            Error::BadStep(_) => "BadStep",
            Error::UnsupportedSteps(_) => "UnsupportedSteps",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::EmptyInput => "EmptyInput",
            Error::BadDims(_) => "BadDims",
            Error::DivergedLoss { .. } => "DivergedLoss",
            Error::MixedDims { .. } => "MixedDims",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::Unknown { .. } => "Unknown",
            Error::Parse { .. } => "ParseError",
            Error::NonUniformGrid { .. } => "NonUniformGrid",
            Error::EmptyFile => "EmptyFile",
            Error::GridMismatch => "GridMismatch",
            Error::ZeroReference(_) => "ZeroReference",
            Error::Config(_) => "Config",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
