use thiserror::Error;

use crate::criteria::Criterion;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Cholesky pivot at `column` fell below the rank tolerance.
    #[error("design is rank deficient: pivot {pivot:.3e} at column {column}")]
    SingularDesign { column: usize, pivot: f64 },

    /// The linear predictor left the admissible region, typically because the
    /// data are separable under a logistic working model.
    #[error("iterate diverged after {iterations} iterations: max |x'beta| = {max_eta:.3e} exceeds {limit:.3e}")]
    Divergence {
        iterations: usize,
        max_eta: f64,
        limit: f64,
        last_iterate: Vec<f64>,
    },

    #[error("solver did not converge in {iterations} iterations (score norm {score_inf_norm:.3e})")]
    NotConverged { iterations: usize, score_inf_norm: f64 },

    #[error("matrix is not symmetric positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("degenerate covariance contrast: smallest generalized eigenvalue {min_eig:.3e} <= floor {floor:.3e}")]
    DegenerateContrast { min_eig: f64, floor: f64 },

    #[error("no candidate has {0} available")]
    NoSelectableModel(Criterion),

    #[error("insufficient replications: got {got}, need at least {min}")]
    InsufficientReplications { got: usize, min: usize },
}
