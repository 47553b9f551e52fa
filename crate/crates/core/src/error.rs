use std::path::PathBuf;

use thiserror::Error;

use crate::types::Termination;

#[derive(Debug, Error)]
pub enum PapaError {
    #[error("empty table: a point cloud needs at least one point")]
    EmptyCloud,

    #[error("ragged table: row {row} has {found} columns, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("zero-dimensional points are not allowed")]
    ZeroDimension,

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("lost support: found {found} neighbors, need at least {required}")]
    LostSupport { found: usize, required: usize },

    #[error("matrix is not symmetric within tolerance (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("covariance is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemiDefinite { eigenvalue: f64 },

    #[error("eigen-solver did not converge after {sweeps} sweeps")]
    EigenSolverFailed { sweeps: usize },

    #[error("principal direction ill-defined: relative eigenvalue gap {gap:.3e} below threshold {threshold:.3e}")]
    DirectionTie { gap: f64, threshold: f64 },

    #[error("second local direction ill-defined (spectrum {spectrum:?})")]
    SecondDirectionUndefined { spectrum: Vec<f64> },

    #[error("histogram has no counts")]
    EmptyHistogram,

    #[error("cloud has a single point: no pairwise distances")]
    NoDistances,

    #[error("trace never crosses the base space (backward: {backward:?}, forward: {forward:?})")]
    NoIntersection {
        backward: Termination,
        forward: Termination,
    },

    #[error("mean trace direction vanishes at the anchor; supply the base space explicitly")]
    DegenerateBaseDirection,

    #[error("no point could be projected onto the base space")]
    AllPointsFailed,

    #[error("insufficient support: {failed} of {probes} probes lost support")]
    InsufficientProbeSupport { failed: usize, probes: usize },

    #[error("level 0 failed: {0}")]
    LevelZeroFailed(Box<PapaError>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: `{token}`")]
    Parse { line: usize, column: usize, token: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl PapaError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        PapaError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PapaError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics of the data (lost support,
    /// missing crossings, ill-defined directions) rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            PapaError::LostSupport { .. }
            | PapaError::NoIntersection { .. }
            | PapaError::AllPointsFailed
            | PapaError::DirectionTie { .. }
            | PapaError::SecondDirectionUndefined { .. }
            | PapaError::EigenSolverFailed { .. }
            | PapaError::InsufficientProbeSupport { .. }
            | PapaError::DegenerateBaseDirection => true,
            PapaError::LevelZeroFailed(inner) => inner.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, PapaError>;
