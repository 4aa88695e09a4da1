//! Hand-built butterfly factorizations of classical transforms.
//!
//! Every constructor returns a [`BPModuleExact`] (one butterfly times one
//! hard permutation) or a [`BPProductExact`] (a product of such modules over
//! an expanded dimension `rN`, read through the upper-left selector).

mod poly;
mod verify;

pub use poly::{
    legendre_params, orthopoly_transition_factorization, orthopoly_via_factors, OrthoParams, Poly, PolyFactor,
    PolyMatrix,
};
pub use verify::{verify_exact_suite, ExactOp, Fault, VerifyOptions, VerifyReport, VerifyRow};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::butterfly::{ButterflyFactorLevel, ButterflyStack};
use crate::numeric::{DenseMatrix, Field, C64};
use crate::perm::{bit_reversal, HardPermutation};
use crate::{checked_log2, Error, Result};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// `B · P` with a fixed permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BPModuleExact {
    pub butterfly: ButterflyStack,
    pub permutation: HardPermutation,
}

impl BPModuleExact {
    pub fn new(butterfly: ButterflyStack, permutation: HardPermutation) -> Result<Self> {
        if butterfly.size() != permutation.len() {
            return Err(Error::dims(butterfly.size(), permutation.len()));
        }
        Ok(Self { butterfly, permutation })
    }

    pub fn size(&self) -> usize {
        self.butterfly.size()
    }

    /// `B (P x)`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let mut y = self.permutation.apply(x)?;
        self.butterfly.apply_in_place(&mut y);
        Ok(y)
    }

    pub fn expand(&self) -> DenseMatrix {
        let m = expand_columns(self.size(), |x| self.apply(x));
        match self.butterfly.field() {
            Field::Real => m.real_part(),
            Field::Complex => m,
        }
    }
}

/// `S (M_1 M_2 ... M_k) Sᵀ`, optionally followed by an entrywise real part.
/// `modules[0]` is the leftmost (last applied) factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BPProductExact {
    pub modules: Vec<BPModuleExact>,
    pub r: usize,
    pub post_real_part: bool,
}

impl BPProductExact {
    pub fn new(modules: Vec<BPModuleExact>, r: usize, post_real_part: bool) -> Result<Self> {
        let first =
            modules.first().ok_or_else(|| Error::InvalidArgument("a product needs at least one module".into()))?;
        let big = first.size();
        if r == 0 || big % r != 0 {
            return Err(Error::InvalidArgument(format!("expansion {r} does not divide {big}")));
        }
        if let Some(bad) = modules.iter().find(|m| m.size() != big) {
            return Err(Error::dims(big, bad.size()));
        }
        Ok(Self { modules, r, post_real_part })
    }

    /// Output dimension `N`.
    pub fn size(&self) -> usize {
        self.modules[0].size() / self.r
    }

    pub fn inner_size(&self) -> usize {
        self.modules[0].size()
    }

    /// Applies the represented `N x N` matrix to `x`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let n = self.size();
        if x.len() != n {
            return Err(Error::dims(n, x.len()));
        }
        let mut y = x.to_vec();
        y.resize(self.inner_size(), ZERO);
        for m in self.modules.iter().rev() {
            y = m.apply(&y)?;
        }
        y.truncate(n);
        if self.post_real_part {
            y.iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(y)
    }

    pub fn expand(&self) -> DenseMatrix {
        let m = expand_columns(self.size(), |x| self.apply(x));
        if self.post_real_part {
            m.real_part()
        } else {
            m
        }
    }

    /// Same factors without the final real part.
    pub fn without_real_part(&self) -> Self {
        Self { post_real_part: false, ..self.clone() }
    }
}

fn expand_columns(n: usize, f: impl Fn(&[C64]) -> Result<Vec<C64>>) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n, Field::Complex);
    let mut e = vec![ZERO; n];
    for j in 0..n {
        e[j] = ONE;
        let col = f(&e).expect("length checked");
        e[j] = ZERO;
        for (i, z) in col.into_iter().enumerate() {
            m.set(i, j, z);
        }
    }
    m
}

fn twiddle_stack(n: usize, sign: f64) -> Result<ButterflyStack> {
    let m = checked_log2(n, 2)?;
    let levels = (1..=m)
        .map(|j| {
            let half = 1usize << (j - 1);
            let size = (2 * half) as f64;
            let omega: Vec<C64> = (0..half).map(|i| C64::from_polar(1.0, sign * 2.0 * PI * i as f64 / size)).collect();
            let neg: Vec<C64> = omega.iter().map(|z| -z).collect();
            ButterflyFactorLevel::new(j, [vec![ONE; half], omega, vec![ONE; half], neg])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ButterflyStack::from_blocks(levels)?.with_field(Field::Complex))
}

/// Cooley-Tukey radix-2 DFT `F_N = B_N (F_{N/2} ⊕ F_{N/2}) P`, unrolled.
pub fn fft_bp(n: usize) -> Result<BPModuleExact> {
    BPModuleExact::new(twiddle_stack(n, -1.0)?, bit_reversal(n)?)
}

/// Inverse DFT: conjugate twiddles with `1/N` folded into the outermost factor.
pub fn ifft_bp(n: usize) -> Result<BPModuleExact> {
    let mut b = twiddle_stack(n, 1.0)?;
    b.scale_rows(&vec![C64::new(1.0 / n as f64, 0.0); n])?;
    BPModuleExact::new(b, bit_reversal(n)?)
}

/// Normalized Sylvester-Hadamard: every factor is `[[1, 1], [1, -1]] / sqrt 2`.
pub fn hadamard_bp(n: usize) -> Result<BPModuleExact> {
    let m = checked_log2(n, 2)?;
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let levels = (1..=m)
        .map(|j| {
            let half = 1usize << (j - 1);
            ButterflyFactorLevel::new(j, [vec![s; half], vec![s; half], vec![s; half], vec![-s; half]])
        })
        .collect::<Result<Vec<_>>>()?;
    BPModuleExact::new(ButterflyStack::from_blocks(levels)?, HardPermutation::identity(n))
}

/// `[x_0, x_2, ..., x_{N-2}, x_{N-1}, ..., x_3, x_1]`: evens, then odds reversed.
pub fn dct_input_permutation(n: usize) -> Result<HardPermutation> {
    checked_log2(n, 2)?;
    let evens = (0..n).step_by(2);
    let odds_rev = (1..n).step_by(2).rev();
    HardPermutation::new(evens.chain(odds_rev).collect())
}

/// Diagonal `diag(d)` as a butterfly: `d` sits in the outermost level, all
/// other levels are identity.
pub fn diagonal_butterfly(d: &[C64]) -> Result<ButterflyStack> {
    let n = d.len();
    let mut b = ButterflyStack::identity(n, Field::Real)?;
    b.scale_rows(d)?;
    Ok(b)
}

/// Unnormalized DCT-II `cos(pi/N (n + 1/2) k)` as
/// `Re(diag(e^{-i pi k / 2N}) F_N P')`.
pub fn dct_bp2(n: usize) -> Result<BPProductExact> {
    let mut left = fft_bp(n)?;
    let scale: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0, -PI * k as f64 / (2 * n) as f64)).collect();
    left.butterfly.scale_rows(&scale)?;
    let right = BPModuleExact::new(ButterflyStack::identity(n, Field::Real)?, dct_input_permutation(n)?)?;
    BPProductExact::new(vec![left, right], 1, true)
}

/// Unnormalized DST-II `sin(pi/N (n + 1/2)(k + 1))` as
/// `Re(diag(i e^{-i pi (k+1) / 2N}) F_N diag(w^{-j}) D P')`
/// with `D = diag(I, -I)` and `w = e^{2 pi i / N}`.
pub fn dst_bp2(n: usize) -> Result<BPProductExact> {
    let mut left = fft_bp(n)?;
    let i = C64::new(0.0, 1.0);
    let scale: Vec<C64> = (0..n).map(|k| i * C64::from_polar(1.0, -PI * (k + 1) as f64 / (2 * n) as f64)).collect();
    left.butterfly.scale_rows(&scale)?;
    let d: Vec<C64> = (0..n)
        .map(|j| {
            let sign = if j < n / 2 { 1.0 } else { -1.0 };
            C64::from_polar(sign, -2.0 * PI * j as f64 / n as f64)
        })
        .collect();
    let right = BPModuleExact::new(diagonal_butterfly(&d)?, dct_input_permutation(n)?)?;
    BPProductExact::new(vec![left, right], 1, true)
}

/// Circular convolution with `h` as `F^{-1} diag(F h) F`.
pub fn circulant_bp2(h: &[C64]) -> Result<BPProductExact> {
    let n = h.len();
    let fh = fft_bp(n)?.apply(h)?;
    let mut right = fft_bp(n)?;
    right.butterfly.scale_rows(&fh)?;
    BPProductExact::new(vec![ifft_bp(n)?, right], 1, false)
}

/// First column of the `2N` circulant whose upper-left block is
/// `toeplitz(t)`: `[t_0, ..., t_{N-1}, 0, t_{-N+1}, ..., t_{-1}]`.
pub fn toeplitz_embedding(t: &[C64]) -> Result<Vec<C64>> {
    if t.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("Toeplitz needs 2N - 1 values, got {}", t.len())));
    }
    let n = t.len().div_ceil(2);
    checked_log2(n, 1)?;
    let mut c = Vec::with_capacity(2 * n);
    c.extend_from_slice(&t[n - 1..]);
    c.push(ZERO);
    c.extend_from_slice(&t[..n - 1]);
    Ok(c)
}

/// Toeplitz `T_jk = t_{j-k}` (values ordered `t_{-N+1} .. t_{N-1}`) embedded
/// in a `2N` circulant, read through the upper-left selector.
pub fn toeplitz_bp2r2(t: &[C64]) -> Result<BPProductExact> {
    let c = toeplitz_embedding(t)?;
    let inner = circulant_bp2(&c)?;
    BPProductExact::new(inner.modules, 2, false)
}

/// `T_1 T_2 ... T_k` in one `2N` product: the projection `SᵀS` between
/// consecutive Toeplitz blocks is folded into the outermost level of each
/// later block by zeroing its lower output rows.
pub fn toeplitz_product_bp(ts: &[Vec<C64>]) -> Result<BPProductExact> {
    let mut modules = Vec::with_capacity(2 * ts.len());
    for (idx, t) in ts.iter().enumerate() {
        let mut part = toeplitz_bp2r2(t)?.modules;
        if idx > 0 {
            let n2 = part[0].size();
            let mut keep = vec![ONE; n2];
            keep[n2 / 2..].iter_mut().for_each(|z| *z = ZERO);
            part[0].butterfly.scale_rows(&keep)?;
        }
        modules.extend(part);
    }
    BPProductExact::new(modules, 2, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{dense_matvec, max_abs_diff, Rng};
    use crate::zoo::{circulant, toeplitz, Scaling, TransformKind, TransformSpec};

    fn raw(kind: TransformKind, n: usize) -> DenseMatrix {
        TransformSpec::new(kind, n).with_scaling(Scaling::Raw).generate().unwrap()
    }

    fn dft_naive(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * ((k * j) % n) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn random_vec(n: usize, rng: &mut Rng) -> Vec<C64> {
        (0..n).map(|_| rng.complex_gaussian(0.5).unwrap()).collect()
    }

    #[test]
    fn fft_n2_is_f2() {
        let m = fft_bp(2).unwrap();
        assert!(m.permutation.is_identity());
        let f2 = DenseMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0]).unwrap();
        assert!(m.expand().max_abs_diff(&f2).unwrap() < 1e-15);
    }

    #[test]
    fn fft_n8_bit_reversal() {
        assert_eq!(fft_bp(8).unwrap().permutation.indices(), &[0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn fft_matches_formula_up_to_1024() {
        for m in 1..=10 {
            let n = 1 << m;
            let err = fft_bp(n).unwrap().expand().max_abs_diff(&raw(TransformKind::Dft, n)).unwrap();
            assert!(err < 1e-10, "N={n} err={err}");
        }
    }

    #[test]
    fn ifft_n2_and_composition() {
        let half = DenseMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, -0.5]).unwrap();
        assert!(ifft_bp(2).unwrap().expand().max_abs_diff(&half).unwrap() < 1e-15);
        let prod = ifft_bp(8).unwrap().expand().matmul(&fft_bp(8).unwrap().expand()).unwrap();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(8)).unwrap() < 1e-12);
    }

    #[test]
    fn ifft_twiddles_are_conjugates() {
        let f = fft_bp(16).unwrap();
        let g = twiddle_stack(16, 1.0).unwrap();
        for (a, b) in f.butterfly.levels().iter().zip(g.levels()) {
            for (da, db) in a.diagonals().iter().zip(b.diagonals()) {
                for (x, y) in da.iter().zip(db) {
                    assert_eq!(x.conj(), *y);
                }
            }
        }
    }

    #[test]
    fn ifft_inverts_fft_within_n_eps() {
        for m in 1..=8 {
            let n = 1 << m;
            let prod = ifft_bp(n).unwrap().expand().matmul(&raw(TransformKind::Dft, n)).unwrap();
            let err = prod.max_abs_diff(&DenseMatrix::identity(n)).unwrap();
            assert!(err < 1e-12 * n as f64, "N={n} err={err}");
        }
    }

    #[test]
    fn hadamard_entries_and_orthogonality() {
        let h2 = hadamard_bp(2).unwrap().expand();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = DenseMatrix::from_real(2, 2, &[s, s, s, -s]).unwrap();
        assert!(h2.max_abs_diff(&want).unwrap() < 1e-15);
        let h = hadamard_bp(64).unwrap();
        for lvl in h.butterfly.levels() {
            for d in lvl.diagonals() {
                assert!(d.iter().all(|z| (z.re.abs() - s).abs() < 1e-16 && z.im == 0.0));
            }
        }
        let m = h.expand();
        let gram = m.matmul(&m.transpose()).unwrap();
        assert!(gram.max_abs_diff(&DenseMatrix::identity(64)).unwrap() < 1e-12);
        assert!(m.max_abs_diff(&raw(TransformKind::Hadamard, 64)).unwrap() < 1e-12);
    }

    #[test]
    fn dct_permutation_n4() {
        assert_eq!(dct_input_permutation(4).unwrap().indices(), &[0, 2, 3, 1]);
        let p = dct_bp2(8).unwrap();
        assert!(p.modules[1].butterfly.expand_dense().max_abs_diff(&DenseMatrix::identity(8)).unwrap() == 0.0);
    }

    #[test]
    fn dct_dst_match_formula() {
        for m in 1..=10 {
            let n = 1 << m;
            let e = dct_bp2(n).unwrap().expand().max_abs_diff(&raw(TransformKind::Dct, n)).unwrap();
            assert!(e < 1e-10, "DCT N={n} err={e}");
            let e = dst_bp2(n).unwrap().expand().max_abs_diff(&raw(TransformKind::Dst, n)).unwrap();
            assert!(e < 1e-10, "DST N={n} err={e}");
        }
    }

    #[test]
    fn real_part_step_is_essential() {
        for n in [4, 8, 32] {
            for p in [dct_bp2(n).unwrap(), dst_bp2(n).unwrap()] {
                let m = p.without_real_part().expand();
                let max_im = m.entries().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                assert!(max_im > 1e-3, "N={n}");
            }
        }
    }

    #[test]
    fn dst_sign_split_n4() {
        let p = dst_bp2(4).unwrap();
        let d = p.modules[1].butterfly.expand_dense();
        let w = |j: usize| C64::from_polar(1.0, -2.0 * PI * j as f64 / 4.0);
        for j in 0..4 {
            let sign = if j < 2 { 1.0 } else { -1.0 };
            assert!((d.get(j, j) - w(j) * sign).norm() < 1e-15);
        }
    }

    #[test]
    fn circulant_trivial_filters() {
        let n = 4;
        let mut e0 = vec![ZERO; n];
        e0[0] = ONE;
        let id = circulant_bp2(&e0).unwrap().expand();
        assert!(id.max_abs_diff(&DenseMatrix::identity(n)).unwrap() < 1e-12);
        let mut e1 = vec![ZERO; n];
        e1[1] = ONE;
        let shift = circulant_bp2(&e1).unwrap();
        let y = shift.apply(&[ONE, 2.0 * ONE, 3.0 * ONE, 4.0 * ONE]).unwrap();
        let want = [4.0 * ONE, ONE, 2.0 * ONE, 3.0 * ONE];
        assert!(max_abs_diff(&y, &want) < 1e-12);
    }

    #[test]
    fn circulant_random_256() {
        let mut rng = Rng::new(3);
        let h = random_vec(256, &mut rng);
        let nrm = crate::numeric::norm2(&h);
        let err = circulant_bp2(&h).unwrap().expand().max_abs_diff(&circulant(&h)).unwrap();
        assert!(err < 1e-9 * nrm, "err={err}");
    }

    #[test]
    fn toeplitz_embedding_n4() {
        let t: Vec<C64> = (-3..=3).map(|v| C64::new(v as f64, 0.5 * v as f64)).collect();
        let c = toeplitz_embedding(&t).unwrap();
        // t_k is stored at t[k + 3]
        let tk = |k: i32| t[(k + 3) as usize];
        assert_eq!(c, vec![tk(0), tk(1), tk(2), tk(3), ZERO, tk(-3), tk(-2), tk(-1)]);
    }

    #[test]
    fn toeplitz_delta_and_random() {
        let mut delta = vec![ZERO; 7];
        delta[3] = ONE;
        let p = toeplitz_bp2r2(&delta).unwrap();
        assert_eq!(p.r, 2);
        assert!(p.expand().max_abs_diff(&DenseMatrix::identity(4)).unwrap() < 1e-12);
        let mut rng = Rng::new(11);
        let t = random_vec(127, &mut rng);
        let err = toeplitz_bp2r2(&t).unwrap().expand().max_abs_diff(&toeplitz(&t).unwrap()).unwrap();
        assert!(err < 1e-9, "err={err}");
        assert!(toeplitz_bp2r2(&t[..126]).is_err());
    }

    #[test]
    fn toeplitz_products() {
        let mut rng = Rng::new(5);
        for n in [2usize, 4, 8, 16] {
            for k in 1..=4 {
                let ts: Vec<Vec<C64>> = (0..k).map(|_| random_vec(2 * n - 1, &mut rng)).collect();
                let mut want = DenseMatrix::identity(n);
                for t in &ts {
                    want = want.matmul(&toeplitz(t).unwrap()).unwrap();
                }
                let got = toeplitz_product_bp(&ts).unwrap().expand();
                let err = got.max_abs_diff(&want).unwrap();
                assert!(err < 1e-7, "N={n} k={k} err={err}");
            }
        }
    }

    #[test]
    fn modules_apply_like_dense() {
        let mut rng = Rng::new(9);
        for n in [2usize, 8, 64] {
            let mods = [fft_bp(n).unwrap(), ifft_bp(n).unwrap(), hadamard_bp(n).unwrap()];
            for m in &mods {
                let dense = m.expand();
                let x = random_vec(n, &mut rng);
                let err = max_abs_diff(&m.apply(&x).unwrap(), &dense_matvec(&dense, &x).unwrap());
                assert!(err < 1e-9);
            }
            let x = random_vec(n, &mut rng);
            let got = fft_bp(n).unwrap().apply(&x).unwrap();
            assert!(max_abs_diff(&got, &dft_naive(&x)) < 1e-9);
        }
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(fft_bp(6).is_err());
        assert!(ifft_bp(1).is_err());
        assert!(hadamard_bp(0).is_err());
        assert!(dct_bp2(12).is_err());
        assert!(circulant_bp2(&[ONE; 3]).is_err());
    }
}
