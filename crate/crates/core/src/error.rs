use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel `{kernel}` expects {expected} arguments, got {got}")]
    Arity {
        kernel: String,
        expected: usize,
        got: usize,
    },

    #[error("kernel `{kernel}` expects {expected}-dimensional points, got dimension {got}")]
    Dimension {
        kernel: String,
        expected: usize,
        got: usize,
    },

    #[error("kernel `{kernel}` returned {value}, outside its declared range [{lo}, {hi}]")]
    RangeViolation {
        kernel: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    #[error("{what}: size {size} exceeds the enumeration cap {cap}")]
    CapExceeded { what: String, size: f64, cap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("kernel `{0}` is not symmetric; this operation requires a permutation-symmetric kernel")]
    NotSymmetric(String),

    #[error("{0} is not certified; use an enumerated, analytic or worst-case value")]
    NotCertified(String),

    #[error("kernel `{kernel}` has range [{lo}, {hi}]; map it to [0, 1] first (Kernel::to_unit_interval)")]
    NotUnitRange { kernel: String, lo: f64, hi: f64 },

    /// A bound's precondition does not hold (e.g. `M < ln²n` for the
    /// random-design bound); rerun with force to evaluate it anyway.
    #[error("validity check failed: {0}")]
    ValidityFlag(String),

    #[error("not available: {0}")]
    Unavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
