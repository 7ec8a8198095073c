//! SPD linear algebra and the special functions used by the Student-t
//! predictive, its PIT transform, and prediction-set radii.

mod spd;
mod special;

pub use spd::{spd_solve, SpdMatrix, PIVOT_FLOOR, SYMMETRY_TOL};
pub use special::{digamma, f_cdf, f_quantile, log_gamma, regularized_incomplete_beta};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("factor is not lower triangular")]
    NotLowerTriangular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain error: {0}")]
    DomainError(&'static str),
}
