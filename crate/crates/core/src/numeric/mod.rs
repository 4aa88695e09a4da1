//! Dense complex linear algebra used for targets, oracles and baselines.

mod dense;
mod rng;
mod svd;

pub use dense::{dense_matvec, dense_matvec_into, frobenius_rmse, DenseMatrix, Field};
pub use rng::{splitmix64, Rng};
pub use svd::{truncated_svd, Svd, SVD_MAX_SWEEPS};

/// Double-precision complex scalar; `re`/`im` pairs, no polar form.
pub type C64 = num_complex::Complex64;

/// Euclidean norm of a complex vector.
pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
