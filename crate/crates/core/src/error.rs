use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index ({i}, {j}) out of range for {n} channels")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("ω = {omega} lies outside the tabulated grid [{min}, {max}]")]
    OutsideGrid { omega: f64, min: f64, max: f64 },
    #[error("dimension {dim} exceeds the dense limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("stability guard: dt·ρ = {product:.3e} must stay below {limit}")]
    Stability { product: f64, limit: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
