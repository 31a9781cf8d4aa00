use thiserror::Error;

use crate::tensor::Decomposition;

pub type Result<T> = std::result::Result<T, AprankError>;

#[derive(Debug, Error)]
pub enum AprankError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vector norm {norm} is not within 1e-6 of the unit sphere")]
    NotUnit { norm: f64 },

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error(
        "exact L_{r} integration needs {needed} monomials but the budget is {budget}; use the Monte Carlo estimator"
    )]
    ExpansionBudget { r: u32, needed: f64, budget: f64 },

    #[error(
        "exact L_{r} integration lost precision (relative error bound {rel_error:.2e}); use the Monte Carlo estimator"
    )]
    IllConditioned { r: u32, rel_error: f64 },

    #[error("covering grid needs {needed:.3e} evaluations, over the budget of {budget:.3e}")]
    CoveringBudget { needed: f64, budget: f64 },

    #[error("Gram matrix is numerically rank deficient at vector {index} (condition number {condition:.3e})")]
    RankDeficient { index: usize, condition: f64 },

    #[error("no half-norm witness after {batches} batches: best |g(v)| = {best_value}, needed {required}")]
    SearchFailure {
        batches: usize,
        best_point: Vec<f64>,
        best_value: f64,
        required: f64,
        partial: Option<Box<Decomposition>>,
    },

    #[error("sparsification did not reach tolerance after {retries} draws (best error {best_error})")]
    SparsifyFailure {
        retries: usize,
        best: Box<Decomposition>,
        best_error: f64,
    },

    #[error("Frank-Wolfe stopped after {iterations} iterations with residual {residual} >= {tolerance}")]
    FrankWolfeBudget {
        iterations: usize,
        residual: f64,
        tolerance: f64,
        trace: Box<crate::frank_wolfe::FWTrace>,
    },

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AprankError {
    /// True for failures of a randomized or budgeted procedure to meet its
    /// contract, as opposed to bad input.
    pub fn is_contract_failure(&self) -> bool {
        matches!(
            self,
            AprankError::SearchFailure { .. }
                | AprankError::SparsifyFailure { .. }
                | AprankError::FrankWolfeBudget { .. }
                | AprankError::InvariantViolation(_)
                | AprankError::RankDeficient { .. }
                | AprankError::ExpansionBudget { .. }
                | AprankError::IllConditioned { .. }
                | AprankError::CoveringBudget { .. }
        )
    }
}
