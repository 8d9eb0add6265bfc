use std::path::PathBuf;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A precondition on an operation argument was violated.
    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    /// A point behind the camera (z <= 0) cannot be projected.
    #[error("cannot project point with z = {z} (must be > 0)")]
    BehindCamera { z: f64 },

    /// A depth value must be strictly positive.
    #[error("invalid depth {depth} (must be > 0)")]
    InvalidDepth { depth: f64 },

    /// Camera validation failed (non-orthonormal rotation, bad intrinsics).
    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    /// Mesh validation failed (bad indices, degenerate faces).
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// Text parse error with a line number (OBJ and friends).
    #[error("parse error at {path}:{line}: {detail}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    /// Binary parse error with a byte offset and the field being read.
    #[error("parse error in {path} at byte {offset} ({field}): {detail}")]
    ParseBinary {
        path: PathBuf,
        offset: u64,
        field: &'static str,
        detail: String,
    },

    /// Dataset directory failed validation.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png error on {path}: {detail}")]
    Png { path: PathBuf, detail: String },

    #[error("json error on {path}: {detail}")]
    Json { path: PathBuf, detail: String },
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn invalid_argument(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
