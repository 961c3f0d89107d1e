//! Numeric kernels: dense and sparse matrices, a reverse-mode tape, PCA and
//! z-scoring.

mod gradcheck;
mod matrix;
mod pca;
mod sparse;
mod tape;

pub use gradcheck::{finite_diff_check, GradCheck, ABS_FLOOR};
pub use matrix::{dot, euclidean, Matrix};
pub use pca::{pca_fit_transform, Pca};
pub use sparse::Csr;
pub use tape::{Tape, Var};

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Variance below which [`standardize`] returns zeros.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Z-scores `values` with the population variance. A (near-)constant input
/// maps to all zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var < DEGENERATE_VARIANCE {
        return vec![0.0; values.len()];
    }
    let sd = var.sqrt();
    values.iter().map(|v| (v - mean) / sd).collect()
}
