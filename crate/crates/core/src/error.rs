use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An eigensolver, linear solve or exponential did not produce a usable result.
    #[error("numerical failure in {context} (dim {dim}, residual {residual:e})")]
    NumericalFailure {
        context: &'static str,
        dim: usize,
        residual: f64,
    },

    /// A probability left the physically allowed range by more than round-off.
    #[error("numerical consistency violated at n = {n}: {quantity} = {value:e}")]
    Consistency {
        n: usize,
        quantity: &'static str,
        value: f64,
    },

    #[error("matrix dimension {requested} exceeds the configured cap {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("site {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("series grids differ at row {row}: t = {left} vs {right}")]
    GridMismatch { row: usize, left: f64, right: f64 },

    #[error("window: {0}")]
    Window(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
