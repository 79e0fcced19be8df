use thiserror::Error;

use crate::ilqr::IterateState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tableau: {0}")]
    InvalidTableau(String),

    /// The adjoint formula divides by `b_i`; every weight must be positive.
    #[error("adjoint tableau undefined: weight b_{index} = {weight} is not positive")]
    AdjointUndefined { index: usize, weight: f64 },

    #[error("unknown {kind} `{name}`")]
    NotFound { kind: &'static str, name: String },

    #[error("degenerate tableau family parameter c2 = {0}")]
    DegenerateFamily(f64),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("stage system singular at step size h = {h}; reduce the step size")]
    StepTooLarge { h: f64 },

    #[error("Riccati inner matrix not positive definite at step {step}")]
    RiccatiFailure { step: usize },

    #[error("implicit stage iteration did not converge at step {step}")]
    RolloutDiverged { step: usize },

    #[error("affine backward pass inner matrix not positive definite at step {step}")]
    BackwardFailure { step: usize },

    #[error("line search failed: no acceptable step length above {min_alpha:e}")]
    LineSearchFailed { min_alpha: f64 },

    #[error("iterative LQR did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        state: Box<IterateState>,
    },

    #[error("costate system singular at step {step}")]
    CostateFailure { step: usize },

    #[error("node control equation not solved at node {node}")]
    NodeControlFailure { node: usize },

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("order study needs a reference solution: {0}")]
    NeedsReference(String),

    #[error("cannot fit an order: {usable} usable samples, at least 3 required")]
    NoFit { usable: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from bad input rather than from a solver.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidTableau(_)
                | Error::NotFound { .. }
                | Error::DegenerateFamily(_)
                | Error::InvalidProblem(_)
                | Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}
