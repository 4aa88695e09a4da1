//! The butterfly matrix: `log2 N` tied block-diagonal factors with an
//! `O(N log N)` multiply.
//!
//! Level `j` (1-based) is block diagonal with `N / 2^j` identical copies of the
//! `2^j x 2^j` block `[[D1, D2], [D3, D4]]`, each `D` a diagonal of length
//! `2^(j-1)`. The copies share storage. Level 1 touches the input first and
//! level `m = log2 N` is outermost:
//!
//! ```text
//! B = L_m * L_(m-1) * ... * L_1
//! ```

use serde::{Deserialize, Serialize};

use crate::numeric::{DenseMatrix, Field, Rng, C64};
use crate::{checked_log2, Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// One tied butterfly factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterflyFactorLevel {
    level: usize,
    diag: [Vec<C64>; 4],
}

impl ButterflyFactorLevel {
    /// Level `j` with diagonals `D1..D4`, each of length `2^(j-1)`.
    pub fn new(level: usize, diag: [Vec<C64>; 4]) -> Result<Self> {
        if level == 0 || level > 62 {
            return Err(Error::InvalidArgument(format!("level {level} out of range")));
        }
        let half = 1usize << (level - 1);
        if let Some(d) = diag.iter().find(|d| d.len() != half) {
            return Err(Error::dims(half, d.len()));
        }
        Ok(Self { level, diag })
    }

    /// The `[[I, 0], [0, I]]` pattern at level `j`.
    pub fn identity(level: usize) -> Self {
        let half = 1usize << (level - 1);
        Self { level, diag: [vec![ONE; half], vec![ZERO; half], vec![ZERO; half], vec![ONE; half]] }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn half(&self) -> usize {
        1 << (self.level - 1)
    }

    pub fn diagonals(&self) -> &[Vec<C64>; 4] {
        &self.diag
    }

    pub fn diagonals_mut(&mut self) -> &mut [Vec<C64>; 4] {
        &mut self.diag
    }

    pub fn param_count(&self) -> usize {
        4 * self.half()
    }

    /// Applies this level in place to `x` (length a multiple of `2^level`).
    #[inline]
    pub fn apply_in_place(&self, x: &mut [C64]) {
        let half = self.half();
        let [d1, d2, d3, d4] = &self.diag;
        for block in x.chunks_exact_mut(2 * half) {
            let (top, bot) = block.split_at_mut(half);
            for i in 0..half {
                let (a, b) = (top[i], bot[i]);
                top[i] = d1[i] * a + d2[i] * b;
                bot[i] = d3[i] * a + d4[i] * b;
            }
        }
    }

    /// Dense `n x n` expansion of this single factor.
    pub fn expand_dense(&self, n: usize) -> DenseMatrix {
        let half = self.half();
        let mut m = DenseMatrix::zeros(n, n, Field::Complex);
        for base in (0..n).step_by(2 * half) {
            for i in 0..half {
                let (t, b) = (base + i, base + half + i);
                m.set(t, t, self.diag[0][i]);
                m.set(t, b, self.diag[1][i]);
                m.set(b, t, self.diag[2][i]);
                m.set(b, b, self.diag[3][i]);
            }
        }
        m
    }
}

/// Product of `log2 N` tied butterfly factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterflyStack {
    n: usize,
    field: Field,
    /// `levels[j - 1]` is level `j`.
    levels: Vec<ButterflyFactorLevel>,
}

impl ButterflyStack {
    /// Random stack for size `n`: real entries `N(0, 1/2)`; complex entries with
    /// independent `N(0, 1/4)` real and imaginary parts, so `E[L_j^* L_j] = I`.
    pub fn init_random(n: usize, field: Field, rng: &mut Rng) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        let mut levels = Vec::with_capacity(m);
        for j in 1..=m {
            let half = 1usize << (j - 1);
            let mut draw = || -> Result<Vec<C64>> {
                (0..half)
                    .map(|_| match field {
                        Field::Real => Ok(C64::new(rng.gaussian(0.0, 0.5)?, 0.0)),
                        Field::Complex => rng.complex_gaussian(0.25),
                    })
                    .collect()
            };
            let diag = [draw()?, draw()?, draw()?, draw()?];
            levels.push(ButterflyFactorLevel { level: j, diag });
        }
        Ok(Self { n, field, levels })
    }

    pub fn identity(n: usize, field: Field) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        Ok(Self { n, field, levels: (1..=m).map(ButterflyFactorLevel::identity).collect() })
    }

    /// Stack from explicit levels ordered `1..=m`. The field is real iff every
    /// entry has zero imaginary part.
    pub fn from_blocks(levels: Vec<ButterflyFactorLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("a butterfly needs at least one level".into()));
        }
        for (idx, lvl) in levels.iter().enumerate() {
            if lvl.level != idx + 1 {
                return Err(Error::InvalidArgument(format!(
                    "level at position {idx} is {} (expected {})",
                    lvl.level,
                    idx + 1
                )));
            }
        }
        let n = 1usize << levels.len();
        let real = levels.iter().all(|l| l.diag.iter().all(|d| d.iter().all(|z| z.im == 0.0)));
        Ok(Self { n, field: if real { Field::Real } else { Field::Complex }, levels })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// Overrides the field tag (e.g. a real-valued stack that will be trained over C).
    pub fn with_field(mut self, field: Field) -> Self {
        if field == Field::Real {
            for lvl in &mut self.levels {
                for d in &mut lvl.diag {
                    d.iter_mut().for_each(|z| z.im = 0.0);
                }
            }
        }
        self.field = field;
        self
    }

    pub fn levels(&self) -> &[ButterflyFactorLevel] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [ButterflyFactorLevel] {
        &mut self.levels
    }

    /// `4N - 4`: level `j` contributes `4 * 2^(j-1)` scalars.
    pub fn param_count(&self) -> usize {
        self.levels.iter().map(ButterflyFactorLevel::param_count).sum()
    }

    /// `B x` in `O(N log N)`.
    pub fn fast_multiply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        let mut y = x.to_vec();
        self.apply_in_place(&mut y);
        Ok(y)
    }

    /// In-place multiply; `x.len()` must equal the stack size.
    pub fn apply_in_place(&self, x: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n);
        for lvl in &self.levels {
            lvl.apply_in_place(x);
        }
    }

    /// Allocation-free multiply into `out`.
    pub fn fast_multiply_into(&self, x: &[C64], out: &mut [C64]) -> Result<()> {
        if x.len() != self.n || out.len() != self.n {
            return Err(Error::dims(self.n, x.len().min(out.len())));
        }
        out.copy_from_slice(x);
        self.apply_in_place(out);
        Ok(())
    }

    /// Dense `L_m ... L_1`, built column by column from the fast multiply.
    pub fn expand_dense(&self) -> DenseMatrix {
        let n = self.n;
        let mut m = DenseMatrix::zeros(n, n, Field::Complex);
        let mut col = vec![ZERO; n];
        for j in 0..n {
            col.iter_mut().for_each(|z| *z = ZERO);
            col[j] = ONE;
            self.apply_in_place(&mut col);
            for (i, z) in col.iter().enumerate() {
                m.set(i, j, *z);
            }
        }
        match self.field {
            Field::Real => m.real_part(),
            Field::Complex => m,
        }
    }

    /// Multiplies the output rows by `scale` (folds a diagonal into level `m`).
    pub fn scale_rows(&mut self, scale: &[C64]) -> Result<()> {
        if scale.len() != self.n {
            return Err(Error::dims(self.n, scale.len()));
        }
        let half = self.n / 2;
        let top = self.levels.last_mut().expect("non-empty");
        for i in 0..half {
            top.diag[0][i] *= scale[i];
            top.diag[1][i] *= scale[i];
            top.diag[2][i] *= scale[half + i];
            top.diag[3][i] *= scale[half + i];
        }
        if scale.iter().any(|z| z.im != 0.0) {
            self.field = Field::Complex;
        }
        Ok(())
    }

    /// Multiplies the input columns by `scale` (folds a diagonal into level 1).
    /// Level 1 is tied, so `scale` must be 2-periodic.
    pub fn scale_columns_periodic(&mut self, scale: [C64; 2]) {
        let first = &mut self.levels[0];
        first.diag[0][0] *= scale[0];
        first.diag[2][0] *= scale[0];
        first.diag[1][0] *= scale[1];
        first.diag[3][0] *= scale[1];
        if scale.iter().any(|z| z.im != 0.0) {
            self.field = Field::Complex;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StackJson {
    #[serde(rename = "N")]
    n: usize,
    field: Field,
    levels: Vec<LevelJson>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct LevelJson {
    j: usize,
    D1: Vec<[f64; 2]>,
    D2: Vec<[f64; 2]>,
    D3: Vec<[f64; 2]>,
    D4: Vec<[f64; 2]>,
}

fn pairs(d: &[C64]) -> Vec<[f64; 2]> {
    d.iter().map(|z| [z.re, z.im]).collect()
}

fn unpairs(d: &[[f64; 2]]) -> Vec<C64> {
    d.iter().map(|p| C64::new(p[0], p[1])).collect()
}

impl Serialize for ButterflyStack {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StackJson {
            n: self.n,
            field: self.field,
            levels: self
                .levels
                .iter()
                .map(|l| LevelJson {
                    j: l.level,
                    D1: pairs(&l.diag[0]),
                    D2: pairs(&l.diag[1]),
                    D3: pairs(&l.diag[2]),
                    D4: pairs(&l.diag[3]),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ButterflyStack {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = StackJson::deserialize(d)?;
        let levels = raw
            .levels
            .iter()
            .map(|l| ButterflyFactorLevel::new(l.j, [unpairs(&l.D1), unpairs(&l.D2), unpairs(&l.D3), unpairs(&l.D4)]))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let stack = ButterflyStack::from_blocks(levels).map_err(D::Error::custom)?;
        if stack.n != raw.n {
            return Err(D::Error::custom(format!("N = {} but levels imply {}", raw.n, stack.n)));
        }
        Ok(stack.with_field(raw.field))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;
    use crate::numeric::{dense_matvec, max_abs_diff, norm2};
    use proptest::prelude::*;

    fn basis(n: usize, j: usize) -> Vec<C64> {
        let mut e = vec![ZERO; n];
        e[j] = ONE;
        e
    }

    fn naive_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(ZERO, |acc, (j, xj)| {
                    let ang = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                    acc + xj * C64::new(ang.cos(), ang.sin())
                })
            })
            .collect()
    }

    fn random_vec(n: usize, rng: &mut Rng) -> Vec<C64> {
        (0..n).map(|_| rng.complex_gaussian(0.5).unwrap()).collect()
    }

    #[test]
    fn param_counts() {
        let mut rng = Rng::new(0);
        let s2 = ButterflyStack::init_random(2, Field::Real, &mut rng).unwrap();
        assert_eq!(s2.param_count(), 4);
        let s8 = ButterflyStack::init_random(8, Field::Complex, &mut rng).unwrap();
        assert_eq!(s8.param_count(), 28);
        for m in 1..12 {
            let s = ButterflyStack::identity(1 << m, Field::Real).unwrap();
            assert_eq!(s.param_count(), 4 * (1 << m) - 4);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut rng = Rng::new(0);
        assert!(matches!(ButterflyStack::init_random(6, Field::Real, &mut rng), Err(Error::NotPowerOfTwo(6))));
        assert!(ButterflyStack::init_random(1, Field::Real, &mut rng).is_err());
    }

    #[test]
    fn real_init_draws_real_entries() {
        let mut rng = Rng::new(11);
        let s = ButterflyStack::init_random(16, Field::Real, &mut rng).unwrap();
        assert!(s.levels().iter().all(|l| l.diagonals().iter().all(|d| d.iter().all(|z| z.im == 0.0))));
    }

    #[test]
    fn init_is_unitary_in_expectation() {
        // Monte Carlo of E[L_j^* L_j] = I at N = 4 for every level.
        let n = 4;
        let trials = 10_000;
        let mut rng = Rng::new(2024);
        for field in [Field::Real, Field::Complex] {
            let mut acc = [vec![ZERO; n * n], vec![ZERO; n * n]];
            for _ in 0..trials {
                let s = ButterflyStack::init_random(n, field, &mut rng).unwrap();
                for (j, lvl) in s.levels().iter().enumerate() {
                    let l = lvl.expand_dense(n);
                    let g = l.conj_transpose().matmul(&l).unwrap();
                    for (a, e) in acc[j].iter_mut().zip(g.entries()) {
                        *a += e;
                    }
                }
            }
            for a in &acc {
                let mean = DenseMatrix::from_entries(n, n, a.iter().map(|z| z / trials as f64).collect()).unwrap();
                let err = mean.max_abs_diff(&DenseMatrix::identity(n)).unwrap();
                assert!(err < 0.03, "{field}: {err}");
            }
        }
    }

    #[test]
    fn identity_stack() {
        let s = ButterflyStack::identity(8, Field::Real).unwrap();
        assert_eq!(s.expand_dense(), DenseMatrix::identity(8));
        let x: Vec<C64> = (0..8).map(|i| C64::new(i as f64, -(i as f64))).collect();
        assert_eq!(s.fast_multiply(&x).unwrap(), x);
    }

    #[test]
    fn n2_hadamard_block() {
        let lvl = ButterflyFactorLevel::new(1, [vec![ONE], vec![ONE], vec![ONE], vec![-ONE]]).unwrap();
        let s = ButterflyStack::from_blocks(vec![lvl]).unwrap();
        let expect = DenseMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0]).unwrap();
        assert_eq!(s.expand_dense(), expect);
    }

    #[test]
    fn from_blocks_rejects_inconsistent_levels() {
        assert!(ButterflyFactorLevel::new(2, [vec![ONE], vec![ONE], vec![ONE], vec![ONE]]).is_err());
        let l2 = ButterflyFactorLevel::identity(2);
        assert!(ButterflyStack::from_blocks(vec![l2]).is_err());
        assert!(ButterflyStack::from_blocks(vec![]).is_err());
    }

    #[test]
    fn fft_twiddles_on_bit_reversed_input() {
        // Level j: D1 = D3 = 1, D2 = -D4 = w_{2^j}^{-i}.
        for n in [4usize, 8] {
            let m = n.trailing_zeros() as usize;
            let levels = (1..=m)
                .map(|j| {
                    let half = 1 << (j - 1);
                    let tw: Vec<C64> = (0..half)
                        .map(|i| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * i as f64 / (2 * half) as f64))
                        .collect();
                    ButterflyFactorLevel::new(
                        j,
                        [vec![ONE; half], tw.clone(), vec![ONE; half], tw.iter().map(|z| -z).collect()],
                    )
                    .unwrap()
                })
                .collect();
            let s = ButterflyStack::from_blocks(levels).unwrap();
            let mut rng = Rng::new(n as u64);
            let x = random_vec(n, &mut rng);
            let rev: Vec<C64> = (0..n).map(|i| x[i.reverse_bits() >> (usize::BITS as usize - m)]).collect();
            let y = s.fast_multiply(&rev).unwrap();
            assert!(max_abs_diff(&y, &naive_dft(&x)) < 1e-12);
        }
    }

    #[test]
    fn expansion_matches_basis_columns() {
        let mut rng = Rng::new(9);
        let s = ButterflyStack::init_random(16, Field::Complex, &mut rng).unwrap();
        let dense = s.expand_dense();
        let y = s.fast_multiply(&basis(16, 3)).unwrap();
        assert!(max_abs_diff(&y, &dense.column(3)) < 1e-15);
    }

    #[test]
    fn expanded_level_has_two_nonzeros_per_row() {
        let mut rng = Rng::new(1);
        let s = ButterflyStack::init_random(16, Field::Complex, &mut rng).unwrap();
        for lvl in s.levels() {
            let d = lvl.expand_dense(16);
            let nnz = d.entries().iter().filter(|z| **z != ZERO).count();
            assert_eq!(nnz, 32);
        }
    }

    #[test]
    fn fast_multiply_length_mismatch() {
        let s = ButterflyStack::identity(4, Field::Real).unwrap();
        assert!(s.fast_multiply(&[ONE; 3]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = Rng::new(77);
        let s = ButterflyStack::init_random(32, Field::Complex, &mut rng).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: ButterflyStack = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        for (a, b) in s.levels().iter().zip(back.levels()) {
            for (da, db) in a.diagonals().iter().zip(b.diagonals()) {
                assert!(da
                    .iter()
                    .zip(db)
                    .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
            }
        }
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["N"], 32);
        assert_eq!(v["levels"][0]["j"], 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fast_multiply_matches_dense(m in 1usize..=8, seed in any::<u64>()) {
            let n = 1 << m;
            let mut rng = Rng::new(seed);
            let s = ButterflyStack::init_random(n, Field::Complex, &mut rng).unwrap();
            let x = random_vec(n, &mut rng);
            let fast = s.fast_multiply(&x).unwrap();
            let dense = dense_matvec(&s.expand_dense(), &x).unwrap();
            prop_assert!(max_abs_diff(&fast, &dense) <= 1e-12 * norm2(&x) * m as f64);
        }

        #[test]
        fn fast_multiply_is_linear(m in 1usize..=7, seed in any::<u64>()) {
            let n = 1 << m;
            let mut rng = Rng::new(seed);
            let s = ButterflyStack::init_random(n, Field::Complex, &mut rng).unwrap();
            let x = random_vec(n, &mut rng);
            let y = random_vec(n, &mut rng);
            let (a, b) = (rng.complex_gaussian(1.0).unwrap(), rng.complex_gaussian(1.0).unwrap());
            let combo: Vec<C64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = s.fast_multiply(&combo).unwrap();
            let fx = s.fast_multiply(&x).unwrap();
            let fy = s.fast_multiply(&y).unwrap();
            let rhs: Vec<C64> = fx.iter().zip(&fy).map(|(p, q)| a * p + b * q).collect();
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12 * (norm2(&x) + norm2(&y)) * (a.norm() + b.norm()).max(1.0));
        }
    }
}
