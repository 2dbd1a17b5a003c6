use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no files in {dir} match pattern {pattern:?}")]
    NoFilesMatched { dir: PathBuf, pattern: String },
    #[error("{path}: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    DimensionMismatch {
        path: PathBuf,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("{path}: cannot decode image: {reason}")]
    Undecodable { path: PathBuf, reason: String },
    #[error("{path}: bad magic, not a flow file")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated payload (expected {expected} bytes, found {found})")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("image too small: {width}x{height} (minimum {min}x{min})")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("singular innovation covariance")]
    SingularInnovation,
    #[error("all {0} frames flagged as outliers, nothing to interpolate from")]
    NoCleanFrames(usize),
    #[error("ground truth frame {frame} outside detection range 0..{frames}")]
    FrameRange { frame: usize, frames: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
