use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two points closer than the singularity guard (1e-6 m).
    #[error("degenerate distance {distance:e} m between path vertices (guard {guard:e} m)")]
    DegenerateDistance { distance: f64, guard: f64 },

    /// Path length does not exceed the focal distance; the shell is empty or a segment.
    #[error("degenerate ellipsoid: path length {path_length} <= focal distance {focal_distance}")]
    DegenerateEllipsoid {
        path_length: f64,
        focal_distance: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid of {requested} voxels exceeds the cap of {cap}")]
    ResolutionOverflow { requested: u128, cap: u64 },

    #[error("integer accumulator overflow at voxel {voxel}")]
    IntegerOverflow { voxel: usize },

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("configuration conflict: {0}")]
    ConfigConflict(String),

    #[error("malformed magic at offset {offset}: expected {expected:?}, found {found:?}")]
    MalformedMagic {
        offset: u64,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported format version {found} at offset {offset}")]
    UnsupportedVersion { offset: u64, found: u16 },

    #[error("truncated payload at offset {offset}: needed {needed} more bytes")]
    TruncatedPayload { offset: u64, needed: u64 },

    #[error("negative or non-finite intensity {value} at offset {offset}")]
    NegativeIntensity { offset: u64, value: f32 },

    #[error("invalid field at offset {offset}: {message}")]
    InvalidField { offset: u64, message: String },

    #[error("scene parse error: {0}")]
    SceneParse(String),

    #[error("scene error in `{field}`: {message}")]
    SceneSemantic { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("time budget exceeded: cell {cell} took {seconds:.3}s (budget {budget:.3}s)")]
    BudgetExceeded {
        cell: String,
        seconds: f64,
        budget: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
