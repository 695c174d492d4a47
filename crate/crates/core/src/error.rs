use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("design is rank deficient: rank {rank} < dimension {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("trimming budget exceeded: removed {removed:.1} > budget {budget:.1}")]
    BudgetExceeded { removed: f64, budget: f64 },

    #[error("grid needs {required} cells, budget is {budget}")]
    GridTooLarge { required: u64, budget: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for outcomes that mean "no valid estimate exists" rather than misuse.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::BudgetExceeded { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
