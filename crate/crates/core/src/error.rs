use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subspace index {index} out of range for a decomposition with {count} subspaces")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("prolongation of subspace {0} does not have full column rank")]
    RankDeficient(usize),

    #[error("subspaces do not span the ambient space")]
    NotSurjective,

    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error(
        "local solver on subspace {j} failed: residual {residual:e} after {iterations} iterations"
    )]
    LocalSolver {
        j: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("reference solution did not converge: {0}")]
    ReferenceSolve(String),

    #[error("rate fit rejected: {0}")]
    DegenerateFit(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// True when the error originates in a local or reference solver.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::LocalSolver { .. } | Error::ReferenceSolve(_) => true,
            Error::AtIteration { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
