//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any module in this crate.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// Two arrays that must agree in shape do not.
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    /// A shape is empty, has a zero entry, or disagrees with a data length.
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    /// A parameter violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iteration produced NaN/Inf or otherwise diverged.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// File does not start with the expected magic bytes.
    #[error("bad magic in {path}")]
    BadMagic { path: PathBuf },

    /// File declares an unknown element type.
    #[error("unsupported dtype {dtype} in {path}")]
    BadDtype { path: PathBuf, dtype: u32 },

    /// Payload shorter than the header demands.
    #[error("truncated payload in {path}: expected {expected} bytes, got {got}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        got: u64,
    },

    /// Any other structural problem with a file.
    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
