use thiserror::Error;

use crate::newton::IterationRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e}){}", at_index(.index))]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        index: Option<usize>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("A is not stable (spectral radius {radius})")]
    UnstableA { radius: f64 },

    #[error("(A, B) is not reachable (reachability rank {rank} < {n})")]
    NotReachable { rank: usize, n: usize },

    #[error("B is rank deficient (rank {rank} < {m})")]
    RankDeficientB { rank: usize, m: usize },

    #[error("matrix is not in Range Gamma (relative residual {residual:e})")]
    NotInRangeGamma { residual: f64 },

    #[error("Lagrange multiplier is not admissible (margin {margin:e})")]
    NotAdmissible { margin: f64 },

    #[error("initial multiplier is not admissible")]
    InitialPointInadmissible,

    #[error("Newton iteration did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    MaxIterationsExceeded {
        iterations: usize,
        gradient_norm: f64,
        trace: Vec<IterationRecord>,
    },

    #[error("Newton system is singular (rank {rank} < {dim})")]
    SingularHessian { rank: usize, dim: usize },

    #[error("model is not stable (root radius {radius})")]
    UnstableModel { radius: f64 },

    #[error("input must be positive, got {0}")]
    NonPositiveInput(f64),

    #[error("too few samples: got {len}, need at least {needed}")]
    TooFewSamples { len: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_index(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" at grid index {i}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
