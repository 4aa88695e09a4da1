//! Learning fast O(N log N) algorithms for linear transforms.
//!
//! A dense target matrix is approximated by products of *butterfly* matrices
//! (log2 N tied block-diagonal factors) and *relaxed permutations* (sigmoid
//! mixtures of three elementary index shuffles per recursion level). Gradient
//! descent on that parametrization recovers the FFT, DCT, DST, Hadamard,
//! Hartley and convolution algorithms from their dense matrices.
//!
//! The crate also ships hand-built factorizations of the same transforms
//! ([`exact`]) which double as oracles for the learned models, equal-budget
//! compression baselines ([`baselines`]), and a small timing harness
//! ([`bench`]).
//!
//! Module map:
//!
//! - [`numeric`]: complex dense matrices, seeded RNG, truncated SVD
//! - [`butterfly`]: the butterfly matrix `B`
//! - [`perm`]: the relaxed permutation `P` and fixed permutations
//! - [`zoo`]: dense generators for every target transform
//! - [`exact`]: exact BP / BPBP / (BP)^k_r factorizations
//! - [`train`]: differentiable models, gradients, Adam, training and search
//! - [`baselines`]: sparse, low-rank and sparse + low-rank approximations
//! - [`bench`]: median-of-repetitions timing and log-log slope fitting
//! - [`report`], [`cli`]: output formats and the `bfly` command driver

pub mod baselines;
pub mod bench;
pub mod butterfly;
pub mod cli;
pub mod error;
pub mod exact;
pub mod numeric;
pub mod perm;
pub mod report;
pub mod train;
pub mod zoo;

pub use butterfly::{ButterflyFactorLevel, ButterflyStack};
pub use error::{Error, Result};
pub use numeric::{dense_matvec, frobenius_rmse, truncated_svd, DenseMatrix, Field, Rng, C64};
pub use perm::{bit_reversal, ElementaryPermKind, HardPermutation, RelaxedPermLevel, RelaxedPermutationStack};
pub use zoo::{Scaling, TransformKind, TransformSpec};

/// Returns `log2(n)` when `n` is a power of two and at least `min`.
pub(crate) fn checked_log2(n: usize, min: usize) -> Result<usize> {
    if n < min || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}
