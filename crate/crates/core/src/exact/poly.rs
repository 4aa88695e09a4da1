//! Sparse factorization of orthogonal-polynomial matrices through products
//! of 2x2 transition matrices.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coefficients `[c_0, c_1, ...]` of `c_0 + c_1 x + ...`.
pub type Poly = Vec<f64>;

fn trim(mut p: Poly) -> Poly {
    while p.len() > 1 && p.last() == Some(&0.0) {
        p.pop();
    }
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

fn poly_mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_add_assign(acc: &mut Poly, p: &[f64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(p) {
        *a += b;
    }
}

fn degree(p: &[f64]) -> Option<usize> {
    p.iter().rposition(|c| *c != 0.0)
}

/// Dense matrix whose entries are real polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![vec![0.0]; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, vec![1.0]);
        }
        m
    }

    /// Row-major entries.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Poly>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dims(rows * cols, entries.len()));
        }
        Ok(Self { rows, cols, entries: entries.into_iter().map(trim).collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.entries[i * self.cols + j] = trim(p);
    }

    /// Degree of entry `(i, j)`; `None` for the zero polynomial.
    pub fn degree(&self, i: usize, j: usize) -> Option<usize> {
        degree(self.get(i, j))
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(|p| degree(p)).max()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(self.cols, other.rows));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = vec![0.0];
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if degree(a).is_some() && degree(b).is_some() {
                        poly_add_assign(&mut acc, &poly_mul(a, b));
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `M v` for a column of polynomials.
    pub fn apply(&self, v: &[Poly]) -> Result<Vec<Poly>> {
        if v.len() != self.cols {
            return Err(Error::dims(self.cols, v.len()));
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = vec![0.0];
                for (k, p) in v.iter().enumerate() {
                    let a = self.get(i, k);
                    if degree(a).is_some() {
                        poly_add_assign(&mut acc, &poly_mul(a, p));
                    }
                }
                trim(acc)
            })
            .collect())
    }
}

/// Block-diagonal factor; only the blocks are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFactor {
    pub blocks: Vec<PolyMatrix>,
}

impl PolyFactor {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn rows(&self) -> usize {
        self.blocks.iter().map(PolyMatrix::rows).sum()
    }

    pub fn cols(&self) -> usize {
        self.blocks.iter().map(PolyMatrix::cols).sum()
    }

    pub fn apply(&self, v: &[Poly]) -> Result<Vec<Poly>> {
        if v.len() != self.cols() {
            return Err(Error::dims(self.cols(), v.len()));
        }
        let mut out = Vec::with_capacity(self.rows());
        let mut offset = 0;
        for b in &self.blocks {
            out.extend(b.apply(&v[offset..offset + b.cols()])?);
            offset += b.cols();
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> PolyMatrix {
        let mut m = PolyMatrix::zeros(self.rows(), self.cols());
        let (mut r0, mut c0) = (0, 0);
        for b in &self.blocks {
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    m.set(r0 + i, c0 + j, b.get(i, j).to_vec());
                }
            }
            r0 += b.rows();
            c0 += b.cols();
        }
        m
    }
}

/// Three-term recurrence `p_0 = c_1`, `p_1 = a_1 x + b_1`,
/// `p_i = (a_i x + b_i) p_{i-1} + c_i p_{i-2}`. Vectors are 1-based in the
/// math and 0-based here: `a[0]` is `a_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl OrthoParams {
    /// Checks that `n` polynomials are defined and `c_1`, every `a_i` are nonzero.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.a.len() < n || self.b.len() < n || self.c.len() < n {
            return Err(Error::InvalidArgument(format!(
                "{n} polynomials need {n} recurrence coefficients of each kind"
            )));
        }
        if self.c[0] == 0.0 || !self.c[0].is_finite() {
            return Err(Error::InvalidArgument("c_1 must be a nonzero real".into()));
        }
        if let Some(i) = self.a[..n].iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("a_{} must be a nonzero real", i + 1)));
        }
        Ok(())
    }

    /// `[p_1, p_0]`.
    pub fn initial(&self) -> Vec<Poly> {
        vec![trim(vec![self.b[0], self.a[0]]), trim(vec![self.c[0]])]
    }

    /// `T_i`, advancing `[p_i, p_{i-1}]` to `[p_{i+1}, p_i]`; `T_0 = I`.
    pub fn transition(&self, i: usize) -> PolyMatrix {
        if i == 0 {
            return PolyMatrix::identity(2);
        }
        let entries = vec![vec![self.b[i], self.a[i]], vec![self.c[i]], vec![1.0], vec![0.0]];
        PolyMatrix::from_entries(2, 2, entries).expect("2x2")
    }

    /// `T_{[l:r]} = T_l T_{l-1} ... T_r`.
    pub fn transition_product(&self, l: usize, r: usize) -> PolyMatrix {
        let mut m = self.transition(r);
        for i in r + 1..=l {
            m = self.transition(i).matmul(&m).expect("2x2");
        }
        m
    }
}

/// Legendre polynomials: `a_1 = 1`, `c_1 = 1`, and for `i >= 2`
/// `a_i = (2i - 1)/i`, `b_i = 0`, `c_i = -(i - 1)/i`.
pub fn legendre_params(n: usize) -> OrthoParams {
    let mut a = vec![1.0];
    let mut c = vec![1.0];
    for i in 2..=n.max(1) {
        let f = i as f64;
        a.push((2.0 * f - 1.0) / f);
        c.push(-(f - 1.0) / f);
    }
    a.truncate(n.max(1));
    c.truncate(n.max(1));
    OrthoParams { b: vec![0.0; a.len()], a, c }
}

/// Factors of the stacked column `[T_{[0:0]}; T_{[1:0]}; ...; T_{[n-1:0]}]`
/// in application order: `factors[k]` holds `2^k` blocks, and
/// `factors[log2 n]` is `blockdiag(T_0, ..., T_{n-1})`. The first
/// `log2 n` factors have `4 x 2` blocks `[I; T_{[s+h-1:s]}]`.
pub fn orthopoly_transition_factorization(params: &OrthoParams, n: usize) -> Result<Vec<PolyFactor>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    params.validate(n)?;
    let depth = n.trailing_zeros() as usize;
    let mut factors = Vec::with_capacity(depth + 1);
    for k in 0..depth {
        let len = n >> k;
        let half = len / 2;
        let blocks = (0..1usize << k)
            .map(|q| {
                let s = q * len;
                let t = params.transition_product(s + half - 1, s);
                let mut b = PolyMatrix::zeros(4, 2);
                b.set(0, 0, vec![1.0]);
                b.set(1, 1, vec![1.0]);
                for i in 0..2 {
                    for j in 0..2 {
                        b.set(2 + i, j, t.get(i, j).to_vec());
                    }
                }
                b
            })
            .collect();
        factors.push(PolyFactor { blocks });
    }
    factors.push(PolyFactor { blocks: (0..n).map(|s| params.transition(s)).collect() });
    Ok(factors)
}

/// `p_0, ..., p_{n-1}` by pushing `[p_1, p_0]` through the factorization and
/// keeping every second row.
pub fn orthopoly_via_factors(params: &OrthoParams, n: usize) -> Result<Vec<Poly>> {
    let factors = orthopoly_transition_factorization(params, n)?;
    let mut v = params.initial();
    for f in &factors {
        v = f.apply(&v)?;
    }
    Ok(v.into_iter().skip(1).step_by(2).collect())
}
