use thiserror::Error;

/// Errors raised by the polarity toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("homogeneous coordinates must not be the zero vector")]
    ZeroVector,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point at infinity has no affine representative")]
    IdealPoint,

    #[error("matrix is singular or too ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("sample {index}: tangency system has rank {rank}, expected {expected}")]
    RankDeficient {
        index: usize,
        rank: usize,
        expected: usize,
    },

    #[error("sample {index}: null space has dimension {dim}, expected 1")]
    NullSpaceAmbiguous { index: usize, dim: usize },

    #[error("gradients are required but missing")]
    MissingGradients,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("evaluation point {point:?} lies outside the sampled grid")]
    OutOfGrid { point: Vec<f64> },

    #[error("unsupported cost: {0}")]
    UnsupportedCost(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input, as opposed
    /// to a numerical failure on well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::ZeroVector
                | Error::NonFinite(_)
                | Error::MissingGradients
                | Error::InvalidGrid(_)
                | Error::InvalidInput(_)
                | Error::UnsupportedCost(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
