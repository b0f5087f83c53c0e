//! Zonotope, probabilistic zonotope and planar polygon representations.
//!
//! A p-Zonotope `(c, G, Σ)` is the supremum of Gaussian densities with
//! covariance `Σ` whose means range over the zonotope `⟨c, G⟩`. It is not a
//! density (its integral exceeds one whenever `G ≠ 0`) but it encloses every
//! Gaussian-like distribution whose mean is only known to lie in a box.
//!
//! All operations are pure: inputs are borrowed, outputs are fresh values.

mod polygon;
mod pzonotope;
mod qp;
mod zonotope;

pub use polygon::Polytope2D;
pub use pzonotope::{LeveledPolytope, PZonotope};
pub use qp::{solve_box_least_squares, BoxQpSolution, QP_MAX_SWEEPS, QP_TOLERANCE};
pub use zonotope::{sqrt_psd, Zonotope};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("bounds inverted at index {index}: lower {lower} > upper {upper}")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("matrix is singular after regularization")]
    Singular,
    #[error("box QP did not converge in {sweeps} sweeps (best distance {best_distance:e})")]
    NotConverged {
        sweeps: usize,
        best_distance: f64,
        best_beta: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, SetError>;

pub(crate) fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SetError::DimensionMismatch { op, expected, found })
    }
}
