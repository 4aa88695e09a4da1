//! Equal-budget compression baselines: keep the `s` largest entries, keep a
//! rank-`r` truncated SVD, or alternate between the two (sparse + low-rank).
//!
//! Budgets are matched to the trainable-parameter count of the butterfly
//! model that would be trained on the same target (see [`budget_for`]); a
//! rank-`r` factorization of an `N x N` matrix costs `2 r N` parameters.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{frobenius_rmse, truncated_svd, DenseMatrix, C64};
use crate::train::{ModelShape, TrainTask};
use crate::zoo::TransformSpec;
use crate::{checked_log2, Error, Field, Result};

/// Alternation cap for [`sparse_plus_lowrank`].
pub const SPL_MAX_ITERS: usize = 200;
/// Stop once an iteration improves the residual by less than this.
pub const SPL_TOL: f64 = 1e-10;
/// Fractions of the budget given to the sparse part.
pub const SPLIT_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Trainable-parameter count of an untied model: `4M - 4` butterfly entries
/// and `3 log2 M` logits per module (`M = rN`), plus the extra input
/// permutation's logits if present.
pub fn budget_for(shape: ModelShape, n: usize, extra_permutation: bool) -> Result<usize> {
    checked_log2(n, 2)?;
    let m = n * shape.r;
    let logits = 3 * m.trailing_zeros() as usize;
    let extra = if extra_permutation { logits } else { 0 };
    Ok(shape.k * (4 * m - 4 + logits) + extra)
}

/// Budget of the model [`TrainTask::for_spec`] would train.
pub fn budget_for_task(task: &TrainTask) -> Result<usize> {
    budget_for(task.shape, task.size(), task.extra_permutation)
}

/// Rank affordable with `budget` parameters on an `n x n` matrix.
pub fn rank_for_budget(budget: usize, n: usize) -> usize {
    budget / (2 * n)
}

/// Keeps the `s` largest-modulus entries. Ties go to the entry that comes
/// first in row-major order.
pub fn sparse_approx(t: &DenseMatrix, s: usize) -> Result<DenseMatrix> {
    let len = t.rows() * t.cols();
    if s > len {
        return Err(Error::InvalidArgument(format!("sparsity {s} exceeds {len} entries")));
    }
    let e = t.entries();
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| e[b].norm_sqr().total_cmp(&e[a].norm_sqr()).then(a.cmp(&b)));
    let mut out = vec![C64::new(0.0, 0.0); len];
    for &i in &order[..s] {
        out[i] = e[i];
    }
    DenseMatrix::from_entries(t.rows(), t.cols(), out)
}

/// Best rank-`r` approximation with `r = floor(budget / 2N)`, capped at `N`.
pub fn lowrank_approx(t: &DenseMatrix, budget: usize) -> Result<DenseMatrix> {
    let r = rank_for_budget(budget, t.rows().max(t.cols()));
    if r == 0 {
        return Err(Error::InvalidArgument(format!("budget {budget} is too small for rank 1")));
    }
    lowrank_of_rank(t, r)
}

fn lowrank_of_rank(t: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let r = r.min(t.rows().min(t.cols()));
    let out = truncated_svd(t, r)?.reconstruct();
    Ok(if t.field() == Field::Real { out.real_part() } else { out })
}

#[derive(Debug, Clone)]
pub struct SparsePlusLowRank {
    pub sparse: DenseMatrix,
    pub lowrank: DenseMatrix,
    pub nnz: usize,
    pub rank: usize,
    pub iterations: usize,
    /// `||T - S - L||_F` of the returned pair.
    pub residual: f64,
    /// The residual went up at some iteration; the best iterate is returned.
    pub oscillated: bool,
}

impl SparsePlusLowRank {
    pub fn approximation(&self) -> DenseMatrix {
        self.sparse.add(&self.lowrank).expect("same shape")
    }
}

/// Alternating projections `S <- top_s(T - L)`, `L <- rank_r(T - S)` from
/// `L = 0`, with `s = round(split * budget)` and the rest spent on rank.
pub fn sparse_plus_lowrank(t: &DenseMatrix, budget: usize, split: f64) -> Result<SparsePlusLowRank> {
    if !(0.0..=1.0).contains(&split) {
        return Err(Error::InvalidArgument(format!("split {split} outside [0, 1]")));
    }
    let n = t.rows().max(t.cols());
    let nnz = ((split * budget as f64).round() as usize).min(t.rows() * t.cols());
    let rank = rank_for_budget(budget - nnz.min(budget), n).min(t.rows().min(t.cols()));
    let zero = DenseMatrix::zeros(t.rows(), t.cols(), t.field());

    let mut lowrank = zero.clone();
    let mut best: Option<(f64, DenseMatrix, DenseMatrix)> = None;
    let mut prev = f64::INFINITY;
    let mut oscillated = false;
    let mut iterations = 0;
    while iterations < SPL_MAX_ITERS {
        iterations += 1;
        let sparse = sparse_approx(&t.sub(&lowrank)?, nnz)?;
        lowrank = if rank == 0 { zero.clone() } else { lowrank_of_rank(&t.sub(&sparse)?, rank)? };
        let residual = t.sub(&sparse)?.sub(&lowrank)?.frobenius_norm();
        if residual > prev {
            oscillated = true;
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, sparse, lowrank.clone()));
        }
        if prev - residual < SPL_TOL {
            break;
        }
        prev = residual;
    }
    let (residual, sparse, lowrank) = best.expect("at least one iteration");
    Ok(SparsePlusLowRank { sparse, lowrank, nnz, rank, iterations, residual, oscillated })
}

/// Best of [`sparse_plus_lowrank`] over [`SPLIT_GRID`].
pub fn best_sparse_plus_lowrank(t: &DenseMatrix, budget: usize) -> Result<(f64, SparsePlusLowRank)> {
    let mut best: Option<(f64, SparsePlusLowRank)> = None;
    for split in SPLIT_GRID {
        let r = sparse_plus_lowrank(t, budget, split)?;
        if best.as_ref().is_none_or(|b| r.residual < b.1.residual) {
            best = Some((split, r));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Sparse,
    LowRank,
    SparsePlusLowRank,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 3] = [Self::Sparse, Self::LowRank, Self::SparsePlusLowRank];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sparse => "sparse",
            Self::LowRank => "lowrank",
            Self::SparsePlusLowRank => "sparse+lowrank",
        }
    }

    /// Approximation of `t` with `budget` parameters.
    pub fn approximate(self, t: &DenseMatrix, budget: usize) -> Result<DenseMatrix> {
        match self {
            Self::Sparse => sparse_approx(t, budget.min(t.rows() * t.cols())),
            Self::LowRank => lowrank_approx(t, budget),
            Self::SparsePlusLowRank => Ok(best_sparse_plus_lowrank(t, budget)?.1.approximation()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub transform: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub method: BaselineMethod,
    pub budget: usize,
    pub rmse: f64,
    pub wall_ms: f64,
}

/// Runs every method at the butterfly-matched budget on one target.
pub fn baselines_for(spec: &TransformSpec) -> Result<Vec<BaselineRow>> {
    let task = TrainTask::for_spec(spec, Field::Complex)?;
    let budget = budget_for_task(&task)?;
    BaselineMethod::ALL
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let approx = method.approximate(&task.target, budget)?;
            Ok(BaselineRow {
                transform: spec.kind.to_string(),
                n: spec.n,
                method,
                budget,
                rmse: frobenius_rmse(&task.target, &approx)?,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

/// All baselines over the cross product of `specs`, in input order.
pub fn baseline_table(specs: &[TransformSpec]) -> Result<Vec<BaselineRow>> {
    let rows: Vec<Vec<BaselineRow>> = specs.par_iter().map(baselines_for).collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn table_csv(rows: &[BaselineRow]) -> String {
    let mut s = String::from("transform,N,method,budget,rmse,wall_ms\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:e},{:.3}\n",
            r.transform,
            r.n,
            r.method.name(),
            r.budget,
            r.rmse,
            r.wall_ms
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;
    use crate::zoo::TransformKind;
    use proptest::prelude::*;

    fn random(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = Rng::new(seed);
        DenseMatrix::from_fn(n, n, |_, _| C64::new(rng.gaussian(0.0, 1.0).unwrap(), 0.0))
    }

    #[test]
    fn sparse_trivial_cases() {
        let t = random(5, 1);
        assert_eq!(sparse_approx(&t, 25).unwrap(), t);
        assert_eq!(sparse_approx(&t, 0).unwrap().max_abs(), 0.0);
        assert!(sparse_approx(&t, 26).is_err());
    }

    #[test]
    fn sparse_ties_follow_row_major_order() {
        let t = DenseMatrix::from_real(2, 2, &[1.0, -1.0, 1.0, 1.0]).unwrap();
        let s = sparse_approx(&t, 2).unwrap();
        assert_eq!(s, DenseMatrix::from_real(2, 2, &[1.0, -1.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn sparse_is_optimal_by_exhaustive_support_search() {
        let t = DenseMatrix::from_real(3, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let got = sparse_approx(&t, 2).unwrap();
        assert_eq!(got, DenseMatrix::from_real(3, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap());
        for (seed, s) in [(3, 2), (4, 4), (5, 7)] {
            let t = random(3, seed);
            let err = t.sub(&sparse_approx(&t, s).unwrap()).unwrap().frobenius_norm();
            // Best s-sparse matrix on a fixed support copies T there.
            let mut best = f64::INFINITY;
            for mask in 0u32..512 {
                if mask.count_ones() as usize != s {
                    continue;
                }
                let kept = DenseMatrix::from_fn(3, 3, |i, j| {
                    if mask >> (3 * i + j) & 1 == 1 {
                        t.get(i, j)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                best = best.min(t.sub(&kept).unwrap().frobenius_norm());
            }
            assert!((err - best).abs() < 1e-14, "seed {seed}");
        }
    }

    #[test]
    fn lowrank_residual_is_svd_tail() {
        let t = random(16, 7);
        let full = truncated_svd(&t, 16).unwrap();
        for r in [1, 3, 8] {
            let l = lowrank_approx(&t, 2 * 16 * r + 5).unwrap();
            let err2 = t.sub(&l).unwrap().frobenius_norm().powi(2);
            let tail: f64 = full.s[r..].iter().map(|s| s * s).sum();
            assert!((err2 - tail).abs() <= 1e-8 * tail, "r={r}");
        }
        assert!(lowrank_approx(&t, 31).is_err());
    }

    #[test]
    fn lowrank_exact_on_rank_one() {
        let u: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 0.5).collect();
        let t = DenseMatrix::from_fn(8, 8, |i, j| C64::new(u[i] * u[j] * 2.0, u[i] - u[j]));
        let l = lowrank_approx(&t, 2 * 8 * 3).unwrap();
        assert!(t.max_abs_diff(&l).unwrap() < 1e-12);
    }

    #[test]
    fn budget_matches_model_param_count() {
        use crate::train::{BPProductModel, InitOptions};
        assert_eq!(budget_for(ModelShape::BP, 64, false).unwrap(), 4 * 64 - 4 + 18);
        assert_eq!(rank_for_budget(budget_for(ModelShape::BP, 64, false).unwrap(), 64), 2);
        for (n, shape, extra) in [(8, ModelShape::BP, false), (16, ModelShape::BPBP, false), (32, ModelShape::BP, true)]
        {
            let opts = InitOptions {
                field: Field::Complex,
                tie_logits: false,
                logit_std: 1.0,
                extra_permutation: extra,
                post_real_part: false,
            };
            let m = BPProductModel::init_random(n, shape, &opts, &mut Rng::new(0)).unwrap();
            assert_eq!(budget_for(shape, n, extra).unwrap(), m.param_count());
        }
    }

    #[test]
    fn planted_diag_plus_rank_one_is_recovered() {
        let n = 16;
        let u: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0 + 0.1).collect();
        let t = DenseMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 10.0 + i as f64 } else { 0.0 };
            C64::new(d + u[i] * u[j], 0.0)
        });
        // n nonzeros plus one rank: n + 2n parameters.
        let r = sparse_plus_lowrank(&t, 3 * n, 1.0 / 3.0).unwrap();
        assert_eq!((r.nnz, r.rank), (n, 1));
        assert!(t.sub(&r.approximation()).unwrap().frobenius_norm() < 1e-8, "{}", r.residual);
    }

    #[test]
    fn degenerate_splits_match_pure_baselines() {
        let t = random(16, 11);
        let budget = 100;
        let s = sparse_plus_lowrank(&t, budget, 1.0).unwrap();
        assert_eq!(s.approximation(), sparse_approx(&t, budget).unwrap());
        let l = sparse_plus_lowrank(&t, budget, 0.0).unwrap();
        assert_eq!(l.approximation(), lowrank_approx(&t, budget).unwrap());
    }

    #[test]
    fn dft_is_not_sparse() {
        let rows = baselines_for(&TransformSpec::new(TransformKind::Dft, 16)).unwrap();
        let sparse = rows.iter().find(|r| r.method == BaselineMethod::Sparse).unwrap();
        assert!(sparse.rmse > 1e-2, "{}", sparse.rmse);
        assert!(table_csv(&rows).starts_with("transform,N,method,budget,rmse,wall_ms\n"));
        assert_eq!(table_csv(&rows).lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sparse_is_idempotent(seed in any::<u64>(), s in 0usize..=36) {
            let t = random(6, seed);
            let once = sparse_approx(&t, s).unwrap();
            prop_assert_eq!(sparse_approx(&once, s).unwrap(), once);
        }

        #[test]
        fn lowrank_error_non_increasing_in_budget(seed in any::<u64>()) {
            let t = random(8, seed);
            let mut prev = f64::INFINITY;
            for budget in (16..=128).step_by(8) {
                let e = t.sub(&lowrank_approx(&t, budget).unwrap()).unwrap().frobenius_norm();
                prop_assert!(e <= prev + 1e-12);
                prev = e;
            }
        }

        #[test]
        fn combined_never_worse_than_pure(seed in any::<u64>(), budget in 16usize..64) {
            let t = random(8, seed);
            let (_, spl) = best_sparse_plus_lowrank(&t, budget).unwrap();
            let sp = t.sub(&sparse_approx(&t, budget).unwrap()).unwrap().frobenius_norm();
            let lr = t.sub(&lowrank_approx(&t, budget).unwrap()).unwrap().frobenius_norm();
            prop_assert!(spl.residual <= sp.min(lr) + 1e-12);
        }
    }
}
