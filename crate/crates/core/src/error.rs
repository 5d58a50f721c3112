use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("entry ({row}, {col}) of {what} is {value}, outside [0, 1]")]
    EntryOutOfRange {
        what: String,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("column x={x} of {what} sums to {sum:.15} (deviation exceeds {tol:e})")]
    NotStochastic {
        what: String,
        x: usize,
        sum: f64,
        tol: f64,
    },

    #[error("index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("eps = {eps} makes a kernel entry negative; largest admissible eps is {max_eps}")]
    EpsilonTooLarge { eps: f64, max_eps: f64 },

    #[error("unknown example id {0} (expected 1 or 2)")]
    UnknownExample(u32),

    #[error("{what} is singular (smallest singular value {sigma_min:e})")]
    Singular { what: String, sigma_min: f64 },

    #[error("object with {entries} entries exceeds the size cap of {cap}")]
    SizeCap { entries: u128, cap: usize },

    #[error("support set must be non-empty")]
    EmptySubset,

    #[error("{0}")]
    Precondition(String),

    #[error("plan has a negative entry {value:e} at (y0 = {y0}, x^n index = {index})")]
    InvalidPlan { y0: usize, index: usize, value: f64 },

    #[error("boundary point: {0}")]
    Boundary(String),
}

impl Error {
    /// Process exit code: 3 when a theorem hypothesis fails, 2 for input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular { .. } | Error::InvalidPlan { .. } | Error::Boundary(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
