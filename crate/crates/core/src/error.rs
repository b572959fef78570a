use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("dimension overflow in {path}: {detail}")]
    DimOverflow { path: PathBuf, detail: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::BadMagic { .. } => "bad_magic",
            Error::Truncated { .. } => "truncated",
            Error::DimOverflow { .. } => "dim_overflow",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::MissingCheckpoint(_) => "missing_checkpoint",
            Error::GeometryMismatch(_) => "geometry_mismatch",
            Error::Diverged(_) => "diverged",
            Error::GradCheck(_) => "gradcheck",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code used by the CLI and the C API. Zero is success and
    /// 2 is reserved for command-line usage errors.
    pub fn code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::BadMagic { .. } => 4,
            Error::Truncated { .. } => 5,
            Error::DimOverflow { .. } => 6,
            Error::Format(_) => 7,
            Error::InvalidArgument(_) => 8,
            Error::ShapeMismatch(_) => 9,
            Error::NonFinite(_) => 10,
            Error::Config(_) => 11,
            Error::MissingCheckpoint(_) => 12,
            Error::GeometryMismatch(_) => 13,
            Error::Diverged(_) => 14,
            Error::GradCheck(_) => 15,
        }
    }
}
