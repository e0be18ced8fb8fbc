use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("BAD_FORMAT: {0}")]
    BadFormat(String),

    #[error("BAD_ANNOTATION: {0}")]
    BadAnnotation(String),

    #[error("NOT_CONNECTED: inlet cannot reach outlet through fluid")]
    NotConnected,

    #[error("OUT_OF_BOUNDS: position ({x}, {y}) lies outside the field")]
    OutOfBounds { x: f64, y: f64 },

    #[error("TOO_FEW_SAMPLES: {got} samples, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("DIMENSION_MISMATCH: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("DIVERGED: {0} residual blew up at iteration {1}")]
    Diverged(&'static str, usize),

    #[error("OBS_OUTSIDE_FLUID: observation at ({x}, {y}) is not inside a fluid pixel")]
    ObsOutsideFluid { x: f64, y: f64 },

    #[error("ZERO_LENGTH_EDGE")]
    ZeroLengthEdge,

    #[error("EMPTY_GRAPH: no fluid nodes on the sampling lattice")]
    EmptyGraph,

    #[error("NO_PATH: open list exhausted before reaching the goal")]
    NoPath,

    #[error("START_GOAL_UNMAPPED: {0}")]
    StartGoalUnmapped(String),

    #[error("UNREACHABLE: waypoint {0} not reached within the time budget")]
    Unreachable(usize),

    #[error("NOT_ARRIVED: goal not reached within {0:.3} s")]
    NotArrived(f64),

    #[error("NON_FINITE: {0}")]
    NonFinite(String),

    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable code, as printed by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::BadFormat(_) => "BAD_FORMAT",
            Error::BadAnnotation(_) => "BAD_ANNOTATION",
            Error::NotConnected => "NOT_CONNECTED",
            Error::OutOfBounds { .. } => "OUT_OF_BOUNDS",
            Error::TooFewSamples { .. } => "TOO_FEW_SAMPLES",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::Diverged(..) => "DIVERGED",
            Error::ObsOutsideFluid { .. } => "OBS_OUTSIDE_FLUID",
            Error::ZeroLengthEdge => "ZERO_LENGTH_EDGE",
            Error::EmptyGraph => "EMPTY_GRAPH",
            Error::NoPath => "NO_PATH",
            Error::StartGoalUnmapped(_) => "START_GOAL_UNMAPPED",
            Error::Unreachable(_) => "UNREACHABLE",
            Error::NotArrived(_) => "NOT_ARRIVED",
            Error::NonFinite(_) => "NON_FINITE",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Io(_) => "IO",
            Error::Json(_) => "BAD_FORMAT",
            Error::Csv(_) => "BAD_FORMAT",
        }
    }
}
