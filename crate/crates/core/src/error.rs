use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the pipeline stages.
///
/// Filesystem failures are kept apart from validation failures so the CLI can
/// map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("frame indices are not contiguous: expected {expected}, found {found}")]
    NonContiguous { expected: usize, found: usize },

    #[error("frame {index} is {found:?}, expected {expected:?} (width, height)")]
    MixedDimensions {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("frame sizes differ: {0:?} vs {1:?}")]
    SizeMismatch((usize, usize), (usize, usize)),

    #[error("frame too small: {width}x{height}, need at least {min}x{min}")]
    FrameTooSmall { width: usize, height: usize, min: usize },

    #[error("cannot upsample from {source_fps} Hz to {target_fps} Hz")]
    Upsample { source_fps: f64, target_fps: f64 },

    #[error("sequence needs at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("bounding box {0} does not intersect the frame")]
    BoxOutsideFrame(String),

    #[error("bounding box too small for tracking ({w}x{h}, minimum 8x8)")]
    DegenerateBox { w: f32, h: f32 },

    #[error("correlation filter is degenerate (zero patch energy with zero regularizer)")]
    DegenerateFilter,

    #[error("no detections to propagate from")]
    NoDetections,

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("no score for window ({source_id}, {start_s:.3} s)")]
    ScoreMiss { source_id: String, start_s: f64 },

    #[error("model expects input {expected}, window provides {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("backend not ready: {0}")]
    BackendNotReady(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    /// True for failures of the filesystem rather than of the inputs' content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
