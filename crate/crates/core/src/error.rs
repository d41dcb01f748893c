//! Error type shared by all voxelforge modules.

use std::path::PathBuf;

/// Errors produced by volume I/O, labeling pipelines and loss evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("unsupported dtype: {0}")]
    UnsupportedDtype(String),

    #[error(
        "payload size mismatch in {path}: header implies {expected} elements, file holds {actual}"
    )]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A labeler found no candidate structure (e.g. no air pockets survive
    /// erosion, or nothing exceeds the bone threshold).
    #[error("NoCandidate: {0}")]
    NoCandidate(String),

    #[error("field length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("probabilities must lie in [0,1] and be finite: offending value {0}")]
    InvalidProbability(f64),

    #[error("per-voxel class probabilities must sum to 1 (tolerance {tolerance}): voxel {index} sums to {sum}")]
    NormalizationViolation {
        index: usize,
        sum: f64,
        tolerance: f64,
    },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("pipeline item {index} failed: {source}")]
    PipelineItem {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn header(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedHeader {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
