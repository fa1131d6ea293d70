//! Dense linear-algebra kernels: one-sided Jacobi SVD, pseudo-inverse and
//! least squares. Everything runs in f64 and is deterministic for a fixed
//! input, which the transformation fits depend on for reproducibility.

mod matrix;
mod svd;

pub use matrix::{cosine_similarity, dot, norm, Matrix};
pub use svd::{pinv, solve_least_squares, svd, SvdResult, DEFAULT_RCOND};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("shape {rows}x{cols} does not match data length {len}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("dimension mismatch in {op}: {}x{} vs {}x{}", lhs.0, lhs.1, rhs.0, rhs.1)]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("SVD did not converge after {sweeps} sweeps (max off-diagonal ratio {max_off_diag:.3e}, condition estimate {condition_estimate:.3e})")]
    NoConvergence {
        sweeps: usize,
        max_off_diag: f64,
        condition_estimate: f64,
    },
}
