//! Learnable permutations.
//!
//! At recursion step `k` (chunk size `N / 2^k`) three elementary shuffles may
//! be applied inside every contiguous chunk:
//!
//! - `a`: even indices first, then odd (`[0,1,2,3] -> [0,2,1,3]`)
//! - `b`: reverse the first half of the chunk
//! - `c`: reverse the second half of the chunk
//!
//! The relaxed level operator is `(p_c P^c + (1-p_c) I)(p_b P^b + (1-p_b) I)(p_a P^a + (1-p_a) I)`
//! with `p_s = sigmoid(l_s)`, so `a` acts first. Levels run coarsest first:
//! the chunk-size-`N` level touches the input before the chunk-size-`N/2` one.
//! Every choice is the identity on chunks of size 2, so the finest level is
//! structurally inert.
//!
//! Permutations act on vectors as `y[i] = x[pi[i]]`.

use serde::{Deserialize, Serialize};

use crate::numeric::{DenseMatrix, Field, Rng, C64};
use crate::{checked_log2, Error, Result};

/// Logit magnitude at which `sigmoid` rounds to exactly 0 or 1 in f64.
pub const HARD_LOGIT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementaryPermKind {
    A,
    B,
    C,
}

impl ElementaryPermKind {
    /// Application order inside one level.
    pub const ALL: [ElementaryPermKind; 3] = [Self::A, Self::B, Self::C];

    pub fn index(self) -> usize {
        match self {
            Self::A => 0,
            Self::B => 1,
            Self::C => 2,
        }
    }

    /// Source index for output slot `i` within a chunk of size `chunk`.
    #[inline]
    pub fn source(self, i: usize, chunk: usize) -> usize {
        let half = chunk / 2;
        match self {
            Self::A => {
                if i < half {
                    2 * i
                } else {
                    2 * (i - half) + 1
                }
            }
            Self::B => {
                if i < half {
                    half - 1 - i
                } else {
                    i
                }
            }
            Self::C => {
                if i < half {
                    i
                } else {
                    half + (chunk - 1 - i)
                }
            }
        }
    }
}

/// Full-length source map for `kind` applied chunk-wise.
pub fn elementary_indices(kind: ElementaryPermKind, n: usize, chunk: usize) -> Result<Vec<usize>> {
    if chunk < 2 || !chunk.is_multiple_of(2) || !n.is_multiple_of(chunk) {
        return Err(Error::InvalidArgument(format!("chunk size {chunk} must be even and divide {n}")));
    }
    Ok((0..n).map(|i| (i / chunk) * chunk + kind.source(i % chunk, chunk)).collect())
}

/// Applies one elementary shuffle within each contiguous chunk.
pub fn apply_elementary<T: Copy>(kind: ElementaryPermKind, chunk: usize, x: &[T]) -> Result<Vec<T>> {
    let idx = elementary_indices(kind, x.len(), chunk)?;
    Ok(idx.iter().map(|&s| x[s]).collect())
}

#[inline]
pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Logits `(l_a, l_b, l_c)` of one recursion level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPermLevel {
    pub logits: [f64; 3],
}

impl RelaxedPermLevel {
    pub fn new(logits: [f64; 3]) -> Self {
        Self { logits }
    }

    /// Exactly the identity (all probabilities 0).
    pub fn off() -> Self {
        Self::new([-HARD_LOGIT; 3])
    }

    /// Hard choice of each elementary factor.
    pub fn hard(a: bool, b: bool, c: bool) -> Self {
        let l = |on: bool| if on { HARD_LOGIT } else { -HARD_LOGIT };
        Self::new([l(a), l(b), l(c)])
    }

    pub fn probabilities(&self) -> [f64; 3] {
        self.logits.map(sigmoid)
    }
}

/// Stack of `log2 N` relaxed levels; with `tied` one logit triple is shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPermutationStack {
    #[serde(rename = "N")]
    n: usize,
    tied: bool,
    /// `m` entries, or one when tied.
    #[serde(rename = "logits")]
    levels: Vec<RelaxedPermLevel>,
}

impl RelaxedPermutationStack {
    /// Stack with explicit per-level logits (`levels.len() == log2 n`), or a single
    /// shared triple when `tied`.
    pub fn new(n: usize, tied: bool, levels: Vec<RelaxedPermLevel>) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        let expected = if tied { 1 } else { m };
        if levels.len() != expected {
            return Err(Error::dims(expected, levels.len()));
        }
        Ok(Self { n, tied, levels })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        Self::new(n, false, vec![RelaxedPermLevel::off(); m])
    }

    /// Random logits `N(0, std^2)` on every level that can move anything. The
    /// untied chunk-size-2 level is pinned to the identity: all of its choices
    /// coincide, so its logits carry no information.
    pub fn init_random(n: usize, tied: bool, std: f64, rng: &mut Rng) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        let mut draw = || -> Result<RelaxedPermLevel> {
            let v = std * std;
            Ok(RelaxedPermLevel::new([rng.gaussian(0.0, v)?, rng.gaussian(0.0, v)?, rng.gaussian(0.0, v)?]))
        };
        let levels = if tied {
            vec![draw()?]
        } else {
            (0..m).map(|k| if n >> k == 2 { Ok(RelaxedPermLevel::off()) } else { draw() }).collect::<Result<_>>()?
        };
        Self::new(n, tied, levels)
    }

    /// Untied stack whose only live level is the coarsest one (chunk `N`);
    /// every finer level is pinned to the identity.
    pub fn init_coarsest(n: usize, std: f64, rng: &mut Rng) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        let v = std * std;
        let mut levels = vec![RelaxedPermLevel::off(); m];
        if n > 2 {
            levels[0] = RelaxedPermLevel::new([rng.gaussian(0.0, v)?, rng.gaussian(0.0, v)?, rng.gaussian(0.0, v)?]);
        }
        Self::new(n, false, levels)
    }

    /// The same hard choice `(a, b, c)` at every level.
    pub fn uniform_hard(n: usize, a: bool, b: bool, c: bool) -> Result<Self> {
        let m = checked_log2(n, 2)?;
        Self::new(n, false, vec![RelaxedPermLevel::hard(a, b, c); m])
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.n.trailing_zeros() as usize
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    /// Stored logit triples (one when tied).
    pub fn stored_levels(&self) -> &[RelaxedPermLevel] {
        &self.levels
    }

    pub fn stored_levels_mut(&mut self) -> &mut [RelaxedPermLevel] {
        &mut self.levels
    }

    /// Effective level `k` (0 = coarsest).
    pub fn level(&self, k: usize) -> &RelaxedPermLevel {
        if self.tied {
            &self.levels[0]
        } else {
            &self.levels[k]
        }
    }

    /// Index into `stored_levels` that drives level `k`.
    pub fn storage_index(&self, k: usize) -> usize {
        if self.tied {
            0
        } else {
            k
        }
    }

    pub fn logit_count(&self) -> usize {
        3 * self.levels.len()
    }

    /// Chunk size of level `k`.
    pub fn chunk(&self, k: usize) -> usize {
        self.n >> k
    }

    /// Relaxed operator applied to `x`, in `O(N log N)`.
    pub fn relaxed_apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        let mut cur = x.to_vec();
        let mut next = vec![C64::new(0.0, 0.0); self.n];
        for k in 0..self.depth() {
            let chunk = self.chunk(k);
            if chunk == 2 {
                continue;
            }
            let probs = self.level(k).probabilities();
            for kind in ElementaryPermKind::ALL {
                let p = probs[kind.index()];
                if p == 0.0 {
                    continue;
                }
                for (i, out) in next.iter_mut().enumerate() {
                    let src = (i / chunk) * chunk + kind.source(i % chunk, chunk);
                    *out = if p == 1.0 { cur[src] } else { cur[i] * (1.0 - p) + cur[src] * p };
                }
                std::mem::swap(&mut cur, &mut next);
            }
        }
        Ok(cur)
    }

    /// Dense relaxed operator (columns are `relaxed_apply(e_j)`).
    pub fn expand_dense(&self) -> DenseMatrix {
        let n = self.n;
        let cols: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[j] = C64::new(1.0, 0.0);
                self.relaxed_apply(&e).expect("length matches")
            })
            .collect();
        DenseMatrix::from_columns(n, &cols).expect("square").real_part()
    }

    /// Rounds every probability (ties go to 1) and returns the resulting
    /// permutation together with `max |p - round(p)|`.
    pub fn harden(&self) -> (HardPermutation, f64) {
        let hard = self.hardened_stack();
        let idx: Vec<C64> = (0..self.n).map(|i| C64::new(i as f64, 0.0)).collect();
        let mapped = hard.relaxed_apply(&idx).expect("length matches");
        let perm = HardPermutation::new(mapped.iter().map(|z| z.re as usize).collect())
            .expect("products of permutations are permutations");
        (perm, self.rounding_distance())
    }

    pub fn rounding_distance(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.probabilities())
            .map(|p| (p - if p >= 0.5 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Copy with every logit pushed to `+-HARD_LOGIT` (probabilities exactly 0/1).
    pub fn hardened_stack(&self) -> Self {
        let mut out = self.clone();
        for lvl in &mut out.levels {
            let p = lvl.probabilities();
            *lvl = RelaxedPermLevel::hard(p[0] >= 0.5, p[1] >= 0.5, p[2] >= 0.5);
        }
        out
    }

    /// Sum of binary entropies over stored logits (a tied triple counts once).
    pub fn entropy(&self) -> f64 {
        self.levels.iter().flat_map(|l| l.probabilities()).map(binary_entropy).sum()
    }
}

/// A discrete permutation stored as a source-index map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HardPermutation {
    indices: Vec<usize>,
}

impl HardPermutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; indices.len()];
        for &i in &indices {
            if i >= indices.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument("index map is not a bijection".into()));
            }
        }
        Ok(Self { indices })
    }

    pub fn identity(n: usize) -> Self {
        Self { indices: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_identity(&self) -> bool {
        self.indices.iter().enumerate().all(|(i, &s)| i == s)
    }

    pub fn apply<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.len() {
            return Err(Error::dims(self.len(), x.len()));
        }
        Ok(self.indices.iter().map(|&s| x[s]).collect())
    }

    /// Allocation-free [`apply`](Self::apply).
    pub fn apply_into<T: Copy>(&self, x: &[T], out: &mut [T]) -> Result<()> {
        if x.len() != self.len() || out.len() != self.len() {
            return Err(Error::dims(self.len(), x.len().min(out.len())));
        }
        for (o, &s) in out.iter_mut().zip(&self.indices) {
            *o = x[s];
        }
        Ok(())
    }

    /// `self` after `first`: `(self o first)(x) = self(first(x))`.
    pub fn after(&self, first: &HardPermutation) -> Result<Self> {
        Ok(Self { indices: first.apply(&self.indices)? })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &s) in self.indices.iter().enumerate() {
            inv[s] = i;
        }
        Self { indices: inv }
    }

    /// `P` with `(P x)_i = x_{pi(i)}`.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n, n, Field::Real);
        for (i, &s) in self.indices.iter().enumerate() {
            m.set(i, s, C64::new(1.0, 0.0));
        }
        m
    }
}

/// Sorts indices by their reversed `log2 N`-bit representation.
pub fn bit_reversal(n: usize) -> Result<HardPermutation> {
    let m = checked_log2(n, 1)?;
    if m == 0 {
        return Ok(HardPermutation::identity(1));
    }
    Ok(HardPermutation { indices: (0..n).map(|i| i.reverse_bits() >> (usize::BITS as usize - m)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::max_abs_diff;
    use crate::numeric::Rng;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn idx_vec(n: usize) -> Vec<C64> {
        (0..n).map(|i| C64::new(i as f64, 0.0)).collect()
    }

    fn as_usize(v: &[C64]) -> Vec<usize> {
        v.iter().map(|z| z.re as usize).collect()
    }

    #[test]
    fn elementary_examples() {
        let x = [0, 1, 2, 3];
        assert_eq!(apply_elementary(ElementaryPermKind::A, 4, &x).unwrap(), vec![0, 2, 1, 3]);
        assert_eq!(apply_elementary(ElementaryPermKind::B, 4, &x).unwrap(), vec![1, 0, 2, 3]);
        assert_eq!(apply_elementary(ElementaryPermKind::C, 4, &x).unwrap(), vec![0, 1, 3, 2]);
        // chunk-wise
        let y: Vec<i32> = (0..8).collect();
        assert_eq!(apply_elementary(ElementaryPermKind::A, 4, &y).unwrap(), vec![0, 2, 1, 3, 4, 6, 5, 7]);
    }

    #[test]
    fn elementary_invalid_chunk() {
        assert!(apply_elementary(ElementaryPermKind::A, 3, &[0; 6]).is_err());
        assert!(apply_elementary(ElementaryPermKind::A, 4, &[0; 6]).is_err());
        assert!(apply_elementary(ElementaryPermKind::B, 0, &[0; 4]).is_err());
    }

    #[test]
    fn all_off_is_identity() {
        let s = RelaxedPermutationStack::identity(8).unwrap();
        let x = idx_vec(8);
        assert_eq!(s.relaxed_apply(&x).unwrap(), x);
        assert_eq!(s.expand_dense(), DenseMatrix::identity(8));
    }

    #[test]
    fn a_everywhere_is_bit_reversal() {
        let s = RelaxedPermutationStack::uniform_hard(8, true, false, false).unwrap();
        let y = s.relaxed_apply(&idx_vec(8)).unwrap();
        assert_eq!(as_usize(&y), vec![0, 4, 2, 6, 1, 5, 3, 7]);
    }

    #[test]
    fn a_is_inert_on_pairs() {
        let s = RelaxedPermutationStack::new(2, false, vec![RelaxedPermLevel::new([0.0, -HARD_LOGIT, -HARD_LOGIT])])
            .unwrap();
        let x = vec![C64::new(1.5, 0.0), C64::new(-2.0, 1.0)];
        assert_eq!(s.relaxed_apply(&x).unwrap(), x);
    }

    #[test]
    fn dct_input_shuffle() {
        // a then c at the top level: [0,1,2,3] -> [0,2,1,3] -> [0,2,3,1]
        let s = RelaxedPermutationStack::new(
            4,
            false,
            vec![RelaxedPermLevel::hard(true, false, true), RelaxedPermLevel::off()],
        )
        .unwrap();
        assert_eq!(as_usize(&s.relaxed_apply(&idx_vec(4)).unwrap()), vec![0, 2, 3, 1]);
    }

    #[test]
    fn relaxed_apply_length_mismatch() {
        let s = RelaxedPermutationStack::identity(4).unwrap();
        assert!(s.relaxed_apply(&idx_vec(8)).is_err());
    }

    #[test]
    fn expand_matches_apply_on_basis() {
        let mut rng = Rng::new(4);
        let s = RelaxedPermutationStack::init_random(8, false, 1.0, &mut rng).unwrap();
        let d = s.expand_dense();
        for j in 0..8 {
            let mut e = vec![C64::new(0.0, 0.0); 8];
            e[j] = C64::new(1.0, 0.0);
            assert!(max_abs_diff(&s.relaxed_apply(&e).unwrap(), &d.column(j)) < 1e-14);
        }
    }

    #[test]
    fn hard_stack_expands_to_permutation_matrix() {
        let s = RelaxedPermutationStack::new(
            8,
            false,
            vec![
                RelaxedPermLevel::hard(true, true, false),
                RelaxedPermLevel::hard(false, true, true),
                RelaxedPermLevel::off(),
            ],
        )
        .unwrap();
        let d = s.expand_dense();
        assert!(d.entries().iter().all(|z| *z == C64::new(0.0, 0.0) || *z == C64::new(1.0, 0.0)));
        let (p, dist) = s.harden();
        assert_eq!(p.to_dense(), d);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn harden_peaked_a() {
        let l = RelaxedPermLevel::new([(0.99f64 / 0.01).ln(), (0.01f64 / 0.99).ln(), (0.02f64 / 0.98).ln()]);
        let s = RelaxedPermutationStack::new(8, false, vec![l; 3]).unwrap();
        let (p, dist) = s.harden();
        assert_eq!(p, bit_reversal(8).unwrap());
        assert!((dist - 0.02).abs() < 1e-12);
    }

    #[test]
    fn harden_tie_rounds_up() {
        let s = RelaxedPermutationStack::new(4, true, vec![RelaxedPermLevel::new([0.0, -HARD_LOGIT, -HARD_LOGIT])])
            .unwrap();
        let (p, dist) = s.harden();
        assert_eq!(p.indices(), &[0, 2, 1, 3]);
        assert_eq!(dist, 0.5);
    }

    #[test]
    fn harden_identity_logits() {
        let s = RelaxedPermutationStack::new(8, false, vec![RelaxedPermLevel::new([-3.0, -2.0, -4.0]); 3]).unwrap();
        let (p, dist) = s.harden();
        assert!(p.is_identity());
        assert!((dist - sigmoid(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn bit_reversal_examples() {
        assert_eq!(bit_reversal(8).unwrap().indices(), &[0, 4, 2, 6, 1, 5, 3, 7]);
        assert!(bit_reversal(2).unwrap().is_identity());
        let p = bit_reversal(16).unwrap();
        assert!(p.after(&p).unwrap().is_identity());
        assert!(bit_reversal(12).is_err());
    }

    #[test]
    fn entropy_examples() {
        let hard = RelaxedPermutationStack::uniform_hard(8, true, false, true).unwrap();
        assert_eq!(hard.entropy(), 0.0);
        let mut one = hard.clone();
        one.stored_levels_mut()[1].logits[1] = 0.0;
        assert!((one.entropy() - std::f64::consts::LN_2).abs() < 1e-15);
        let l = RelaxedPermLevel::new([0.3, 0.3, 0.3]);
        let tied = RelaxedPermutationStack::new(8, true, vec![l]).unwrap();
        let h = binary_entropy(sigmoid(0.3));
        assert!((tied.entropy() - 3.0 * h).abs() < 1e-15);
        let untied = RelaxedPermutationStack::new(8, false, vec![l; 3]).unwrap();
        assert!((untied.entropy() - 9.0 * h).abs() < 1e-15);
    }

    #[test]
    fn tied_levels_share_probabilities() {
        let mut rng = Rng::new(8);
        let s = RelaxedPermutationStack::init_random(16, true, 1.0, &mut rng).unwrap();
        let p0 = s.level(0).probabilities();
        assert!((1..4).all(|k| s.level(k).probabilities() == p0));
        assert_eq!(s.logit_count(), 3);
    }

    #[test]
    fn eight_outcomes_per_level() {
        let mut seen = HashSet::new();
        for bits in 0..8u8 {
            let s = RelaxedPermutationStack::new(
                8,
                false,
                vec![
                    RelaxedPermLevel::hard(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0),
                    RelaxedPermLevel::off(),
                    RelaxedPermLevel::off(),
                ],
            )
            .unwrap();
            seen.insert(s.harden().0);
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn hard_permutation_validation() {
        assert!(HardPermutation::new(vec![0, 0, 1]).is_err());
        assert!(HardPermutation::new(vec![0, 3]).is_err());
        let p = HardPermutation::new(vec![2, 0, 1]).unwrap();
        assert!(p.after(&p.inverse()).unwrap().is_identity());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = Rng::new(10);
        let s = RelaxedPermutationStack::init_random(16, false, 1.0, &mut rng).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<RelaxedPermutationStack>(&text).unwrap(), s);
        let p = bit_reversal(4).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[0,2,1,3]");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn relaxed_is_doubly_stochastic(m in 1usize..=6, tied in any::<bool>(), seed in any::<u64>()) {
            let n = 1 << m;
            let mut rng = Rng::new(seed);
            let s = RelaxedPermutationStack::init_random(n, tied, 2.0, &mut rng).unwrap();
            let d = s.expand_dense();
            for i in 0..n {
                let row: f64 = (0..n).map(|j| d.get(i, j).re).sum();
                let col: f64 = (0..n).map(|j| d.get(j, i).re).sum();
                prop_assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn hardening_matches_saturated_logits(m in 1usize..=6, seed in any::<u64>()) {
            let n = 1 << m;
            let mut rng = Rng::new(seed);
            let s = RelaxedPermutationStack::init_random(n, false, 3.0, &mut rng).unwrap();
            let (p, _) = s.harden();
            prop_assert_eq!(p.to_dense(), s.hardened_stack().expand_dense());
            // hard application is pure copying
            let x: Vec<C64> = (0..n).map(|_| rng.complex_gaussian(1.0).unwrap()).collect();
            prop_assert_eq!(s.hardened_stack().relaxed_apply(&x).unwrap(), p.apply(&x).unwrap());
        }
    }
}
