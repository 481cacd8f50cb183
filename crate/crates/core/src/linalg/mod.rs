//! Numeric engine: exact Laurent-polynomial arithmetic on the unit circle
//! and small dense complex Hermitian spectral routines.
//!
//! A [`LaurentPoly`] is a finite series `P(z) = sum_d c_d z^d` understood on
//! `z = e^{2pi i xi}`. Two facts about the circle drive everything downstream:
//! the adjoint of `P` is the conjugate reflection `c_d -> conj(c_{-d})`, and
//! `int_0^1 |P(e^{2pi i xi})|^2 dxi = sum_d |c_d|^2`, which serves as an exact
//! integration rule wherever a squared transform has to be summed over `xi`.

mod dense;
mod laurent;

pub use dense::{gram_inverse, hermitian_eigen, CMatrix, Eigen};
pub use laurent::{laurent_det, LaurentMatrix, LaurentPoly, COEFF_PRUNE};

use thiserror::Error;

/// Failure modes of the dense and Laurent routines.
#[derive(Debug, Error)]
pub enum LinalgError {
    /// Exact determinant expansion is limited to small orders.
    #[error("determinant expansion supports at most {max}x{max}, got {size}x{size}")]
    TooLarge { size: usize, max: usize },
    /// Gram matrix numerically singular.
    #[error("matrix numerically singular: lambda_min = {lambda_min:.3e}, lambda_max = {lambda_max:.3e}")]
    Singular { lambda_min: f64, lambda_max: f64 },
    /// Incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),
}
