use thiserror::Error;

use crate::grid::GridError;
use crate::problem::SpecError;
use crate::tridiag::SolveError;

/// Failures of the numerical routines.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("non-finite value in {0}")]
    Range(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("singular Jacobian (pivot {pivot:e})")]
    SingularJacobian { pivot: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("coefficient a_{0} is not spatially constant")]
    NonConstantCoefficients(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("need at least {need} diagnostic rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

pub type Result<T, E = NumericsError> = std::result::Result<T, E>;
