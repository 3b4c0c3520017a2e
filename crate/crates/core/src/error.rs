use thiserror::Error;

/// Errors raised by fitting, embedding, filtering and charting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("no cloud point within radius {radius:.6e} after {growths} radius growths")]
    EmptyNeighborhood { radius: f64, growths: u32 },

    #[error("no cloud point inside the cylinder (r1 = {r1:.6e}, r2 = {r2:.6e}) after {growths} growths")]
    EmptyCylinder { r1: f64, r2: f64, growths: u32 },

    #[error("contraction direction has zero norm")]
    DegenerateDirection,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid neighbor count k = {k} for {m} points (need k < m)")]
    InvalidK { k: usize, m: usize },

    #[error("ill-posed embedding problem: {reason}")]
    IllPosed {
        reason: String,
        condition: Option<f64>,
    },

    #[error("matrix is not positive definite (smallest pivot {min_pivot:.3e})")]
    NotPositiveDefinite { min_pivot: f64 },

    #[error("series too short: length {len}, need more than {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("series has zero sample variance")]
    DegenerateVariance,

    #[error("point lies in the kernel of the sphere projection")]
    KernelPoint,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
