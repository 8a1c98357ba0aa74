//! Dense linear-algebra kernels and the matrix-splitting calculus.
//!
//! Everything here is deterministic: no randomized pivoting, no
//! parallelism, identical inputs give bit-identical outputs. Sizes are
//! desk scale (n ≲ 50), so the kernels favor simplicity over blocking:
//! cyclic Jacobi for symmetric eigenproblems, LU with partial pivoting
//! for solves, Collatz–Wielandt-bracketed power iteration for Perron
//! roots.

mod eig;
mod matrix;
mod solve;
mod spectral;

pub use eig::{cholesky_pd, sym_eig, sym_eig_min, sym_eig_min_unchecked, sym_eig_values};
pub use matrix::{interval_mat_vec, split, Matrix, MatrixSplit};
pub use solve::{solve, solve_vec};
pub use spectral::{sigma_max, sigma_min, spectral_radius_nonneg};

use thiserror::Error;

/// Numerical margin for strict positive definiteness checks ("≻ 0").
pub const PD_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("interval bound crossing at component {index}: lo {lo} > hi {hi}")]
    IntervalCrossing { index: usize, lo: f64, hi: f64 },
    #[error("matrix singular to tolerance at pivot column {pivot}")]
    Singular { pivot: usize },
    #[error("asymmetry {asymmetry:e} at ({row},{col}) exceeds the 1e-9 tolerance")]
    Asymmetric {
        row: usize,
        col: usize,
        asymmetry: f64,
    },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("negative entry {value} at ({row},{col}); a nonnegative matrix is required")]
    NegativeEntry { row: usize, col: usize, value: f64 },
}

/// Vector helpers shared across the crate. Vectors are plain `Vec<f64>`;
/// these stay free functions rather than a newtype because half the call
/// sites hand slices straight into matrix kernels.
pub mod vecops {
    /// Euclidean norm.
    pub fn norm2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute component.
    pub fn norm_inf(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len(), "dot length mismatch");
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), b.len(), "add length mismatch");
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), b.len(), "sub length mismatch");
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
        a.iter().map(|x| c * x).collect()
    }

    /// Elementwise `a <= b`, with `tol` of slack.
    pub fn le(a: &[f64], b: &[f64], tol: f64) -> bool {
        assert_eq!(a.len(), b.len(), "le length mismatch");
        a.iter().zip(b).all(|(x, y)| *x <= *y + tol)
    }

    /// Concatenate two vectors.
    pub fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = a.to_vec();
        out.extend_from_slice(b);
        out
    }
}
