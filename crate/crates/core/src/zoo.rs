//! Dense generators for the target transforms.
//!
//! Entry `(k, n)` of each matrix is the transform's formula with output index
//! `k` and input index `n`. With [`Scaling::Normalized`] the matrices have
//! norm on the order of one: DFT and Hartley times `1/sqrt(N)`, DCT and DST
//! times `sqrt(2/N)`, Legendre row `k` times `sqrt((2k+1)/N)`. Hadamard is
//! normalized by its recursion, convolution filters have unit norm, and Randn
//! is used as drawn.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numeric::{DenseMatrix, Field, Rng, C64};
use crate::{checked_log2, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Dft,
    Dct,
    Dst,
    #[serde(rename = "conv")]
    Convolution,
    Hadamard,
    Hartley,
    Legendre,
    Randn,
}

impl TransformKind {
    pub const ALL: [TransformKind; 8] = [
        Self::Dft,
        Self::Dct,
        Self::Dst,
        Self::Convolution,
        Self::Hadamard,
        Self::Hartley,
        Self::Legendre,
        Self::Randn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dft => "dft",
            Self::Dct => "dct",
            Self::Dst => "dst",
            Self::Convolution => "conv",
            Self::Hadamard => "hadamard",
            Self::Hartley => "hartley",
            Self::Legendre => "legendre",
            Self::Randn => "randn",
        }
    }

    /// Whether the generated matrix is real.
    pub fn is_real(self) -> bool {
        !matches!(self, Self::Dft | Self::Convolution)
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s.to_ascii_lowercase()).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown transform '{s}' (dft|dct|dst|conv|hadamard|hartley|legendre|randn)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Raw,
    #[default]
    Normalized,
}

/// A target transform of size `n`. Randn and seeded convolution filters are
/// fully determined by `(seed, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub scaling: Scaling,
    pub seed: u64,
    /// Explicit convolution filter; drawn from `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<Vec<C64>>,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, n: usize) -> Self {
        Self { kind, n, scaling: Scaling::Normalized, seed: 0, filter: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_filter(mut self, h: Vec<C64>) -> Self {
        self.filter = Some(h);
        self
    }

    /// Convolution filter: explicit, or complex Gaussian from `seed` scaled to unit norm.
    pub fn convolution_filter(&self) -> Result<Vec<C64>> {
        match &self.filter {
            Some(h) if h.len() != self.n => Err(Error::dims(self.n, h.len())),
            Some(h) => Ok(h.clone()),
            None => seeded_unit_filter(self.n, self.seed),
        }
    }

    pub fn generate(&self) -> Result<DenseMatrix> {
        generate(self)
    }
}

/// Complex Gaussian filter of unit Euclidean norm.
pub fn seeded_unit_filter(n: usize, seed: u64) -> Result<Vec<C64>> {
    let mut rng = Rng::new(seed);
    let h: Vec<C64> = (0..n).map(|_| rng.complex_gaussian(0.5)).collect::<Result<_>>()?;
    let nrm = crate::numeric::norm2(&h);
    Ok(h.into_iter().map(|z| z / nrm).collect())
}

/// Dense matrix of `spec`.
pub fn generate(spec: &TransformSpec) -> Result<DenseMatrix> {
    let n = spec.n;
    checked_log2(n, 2)?;
    let nf = n as f64;
    let normalized = spec.scaling == Scaling::Normalized;
    let real = |v: f64| C64::new(v, 0.0);
    let m = match spec.kind {
        TransformKind::Dft => {
            let s = if normalized { 1.0 / nf.sqrt() } else { 1.0 };
            DenseMatrix::from_fn(n, n, |k, j| C64::from_polar(s, -2.0 * PI * ((k * j) % n) as f64 / nf))
        }
        TransformKind::Dct => {
            let s = if normalized { (2.0 / nf).sqrt() } else { 1.0 };
            DenseMatrix::from_fn(n, n, |k, j| real(s * (PI / nf * (j as f64 + 0.5) * k as f64).cos()))
        }
        TransformKind::Dst => {
            let s = if normalized { (2.0 / nf).sqrt() } else { 1.0 };
            DenseMatrix::from_fn(n, n, |k, j| real(s * (PI / nf * (j as f64 + 0.5) * (k + 1) as f64).sin()))
        }
        TransformKind::Convolution => circulant(&spec.convolution_filter()?),
        TransformKind::Hadamard => hadamard(n),
        TransformKind::Hartley => {
            let s = if normalized { 1.0 / nf.sqrt() } else { 1.0 };
            DenseMatrix::from_fn(n, n, |k, j| {
                let t = 2.0 * PI * ((k * j) % n) as f64 / nf;
                real(s * (t.cos() + t.sin()))
            })
        }
        TransformKind::Legendre => {
            let mut m = DenseMatrix::zeros(n, n, Field::Real);
            for j in 0..n {
                let vals = legendre_values(n, 2.0 * j as f64 / nf - 1.0);
                for (k, v) in vals.into_iter().enumerate() {
                    let s = if normalized { ((2 * k + 1) as f64 / nf).sqrt() } else { 1.0 };
                    m.set(k, j, real(s * v));
                }
            }
            m
        }
        TransformKind::Randn => {
            let mut rng = Rng::new(spec.seed);
            let var = 1.0 / nf;
            let vals: Vec<f64> = (0..n * n).map(|_| rng.gaussian(1.0, var)).collect::<Result<_>>()?;
            DenseMatrix::from_real(n, n, &vals)?
        }
    };
    Ok(m)
}

/// Sylvester Hadamard matrix with the `1/sqrt(2)` recursion.
fn hadamard(n: usize) -> DenseMatrix {
    let m = n.trailing_zeros() as i32;
    let s = 2f64.powf(-(m as f64) / 2.0);
    DenseMatrix::from_fn(n, n, |i, j| {
        let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(sign * s, 0.0)
    })
}

/// `L_0(x), ..., L_(count-1)(x)` by the three-term recurrence.
pub fn legendre_values(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..count {
        out.push(cur);
        let kk = (k + 1) as f64;
        let next = if k == 0 { x } else { ((2.0 * kk - 1.0) * x * cur - (kk - 1.0) * prev) / kk };
        prev = cur;
        cur = next;
    }
    out
}

/// Monomial coefficients `[c_0, c_1, ..., c_k]` of `L_k` via the recurrence.
pub fn legendre_poly_coeffs(k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for j in 2..=k {
        let jf = j as f64;
        let mut next = vec![0.0; j + 1];
        for (d, c) in cur.iter().enumerate() {
            next[d + 1] += (2.0 * jf - 1.0) / jf * c;
        }
        for (d, c) in prev.iter().enumerate() {
            next[d] -= (jf - 1.0) / jf * c;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// Circulant matrix `A_jk = h_((j - k) mod N)`.
pub fn circulant(h: &[C64]) -> DenseMatrix {
    let n = h.len();
    DenseMatrix::from_fn(n, n, |j, k| h[(j + n - k) % n])
}

/// Toeplitz matrix `T_jk = t_(j-k)` from `t = [t_(-N+1), ..., t_0, ..., t_(N-1)]`.
pub fn toeplitz(t: &[C64]) -> Result<DenseMatrix> {
    if t.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("Toeplitz needs 2N - 1 values, got {}", t.len())));
    }
    let n = t.len().div_ceil(2);
    Ok(DenseMatrix::from_fn(n, n, |j, k| t[j + n - 1 - k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{dense_matvec, max_abs_diff};
    use num_rational::Ratio;

    fn unitarity_error(m: &DenseMatrix) -> f64 {
        let g = m.conj_transpose().matmul(m).unwrap();
        g.max_abs_diff(&DenseMatrix::identity(m.rows())).unwrap()
    }

    #[test]
    fn dft2_normalized() {
        let m = generate(&TransformSpec::new(TransformKind::Dft, 2)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = DenseMatrix::from_real(2, 2, &[s, s, s, -s]).unwrap();
        assert!(m.max_abs_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn hadamard4_entries() {
        let m = generate(&TransformSpec::new(TransformKind::Hadamard, 4)).unwrap();
        let expect =
            DenseMatrix::from_real(4, 4, &[1., 1., 1., 1., 1., -1., 1., -1., 1., 1., -1., -1., 1., -1., -1., 1.])
                .unwrap()
                .scale(C64::new(0.5, 0.0));
        assert_eq!(m, expect);
    }

    #[test]
    fn hadamard_entries_are_exact_powers() {
        for mexp in 1..=10 {
            let n = 1 << mexp;
            let m = generate(&TransformSpec::new(TransformKind::Hadamard, n)).unwrap();
            let s = 2f64.powi(-mexp).sqrt();
            assert!(m.entries().iter().all(|z| z.re.abs() == s && z.im == 0.0), "N = {n}");
        }
    }

    #[test]
    fn hartley_raw_entry() {
        let m = generate(&TransformSpec::new(TransformKind::Hartley, 4).with_scaling(Scaling::Raw)).unwrap();
        assert!((m.get(1, 1).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_raw_row_two() {
        let n = 8;
        let m = generate(&TransformSpec::new(TransformKind::Legendre, n).with_scaling(Scaling::Raw)).unwrap();
        for j in 0..n {
            let x = 2.0 * j as f64 / n as f64 - 1.0;
            assert!((m.get(2, j).re - (3.0 * x * x - 1.0) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unitary_transforms() {
        for n in [2, 8, 64, 1024] {
            for kind in [TransformKind::Dft, TransformKind::Hadamard, TransformKind::Hartley] {
                let m = generate(&TransformSpec::new(kind, n)).unwrap();
                assert!(unitarity_error(&m) < 1e-10, "{kind} N = {n}");
            }
        }
    }

    #[test]
    fn dct_dst_near_orthogonal() {
        for n in [4, 16, 128] {
            for kind in [TransformKind::Dct, TransformKind::Dst] {
                let m = generate(&TransformSpec::new(kind, n)).unwrap();
                assert!(unitarity_error(&m) < 0.5, "{kind} N = {n}");
            }
        }
    }

    #[test]
    fn invalid_sizes() {
        for kind in TransformKind::ALL {
            assert!(generate(&TransformSpec::new(kind, 12)).is_err());
        }
        let spec = TransformSpec::new(TransformKind::Convolution, 8).with_filter(vec![C64::new(1.0, 0.0); 4]);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn seeded_targets_are_reproducible() {
        for kind in [TransformKind::Randn, TransformKind::Convolution] {
            let a = generate(&TransformSpec::new(kind, 16).with_seed(3)).unwrap();
            let b = generate(&TransformSpec::new(kind, 16).with_seed(3)).unwrap();
            let c = generate(&TransformSpec::new(kind, 16).with_seed(4)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
        let h = TransformSpec::new(TransformKind::Convolution, 32).convolution_filter().unwrap();
        assert!((crate::numeric::norm2(&h) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn randn_moments() {
        let n = 256;
        let m = generate(&TransformSpec::new(TransformKind::Randn, n).with_seed(1)).unwrap();
        let vals: Vec<f64> = m.entries().iter().map(|z| z.re).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
        assert!((var * n as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn circulant_examples() {
        let n = 4;
        let mut e0 = vec![C64::new(0.0, 0.0); n];
        e0[0] = C64::new(1.0, 0.0);
        assert_eq!(circulant(&e0), DenseMatrix::identity(n));
        let mut e1 = vec![C64::new(0.0, 0.0); n];
        e1[1] = C64::new(1.0, 0.0);
        let shift = circulant(&e1);
        let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 0.0)).collect();
        let y = dense_matvec(&shift, &x).unwrap();
        assert_eq!(y.iter().map(|z| z.re).collect::<Vec<_>>(), vec![3.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn circulant_matches_naive_convolution() {
        let n = 8;
        let mut rng = Rng::new(12);
        let h: Vec<C64> = (0..n).map(|_| rng.complex_gaussian(1.0).unwrap()).collect();
        let x: Vec<C64> = (0..n).map(|_| rng.complex_gaussian(1.0).unwrap()).collect();
        let naive: Vec<C64> = (0..n).map(|k| (0..n).map(|j| x[j] * h[(k + n - j) % n]).sum()).collect();
        let y = dense_matvec(&circulant(&h), &x).unwrap();
        assert!(max_abs_diff(&y, &naive) < 1e-12);
    }

    #[test]
    fn toeplitz_examples() {
        let n = 3;
        let mut t = vec![C64::new(0.0, 0.0); 2 * n - 1];
        t[n - 1] = C64::new(1.0, 0.0);
        assert_eq!(toeplitz(&t).unwrap(), DenseMatrix::identity(n));
        let mut t = vec![C64::new(0.0, 0.0); 2 * n - 1];
        t[n] = C64::new(1.0, 0.0); // t_1
        let m = toeplitz(&t).unwrap();
        let expect = DenseMatrix::from_real(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 0.]).unwrap();
        assert_eq!(m, expect);
        assert!(toeplitz(&[C64::new(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn toeplitz_entrywise() {
        let n = 4;
        let mut rng = Rng::new(2);
        let t: Vec<C64> = (0..2 * n - 1).map(|_| rng.complex_gaussian(1.0).unwrap()).collect();
        let m = toeplitz(&t).unwrap();
        for j in 0..n {
            for k in 0..n {
                let d = j as isize - k as isize;
                assert_eq!(m.get(j, k), t[(d + n as isize - 1) as usize]);
            }
        }
    }

    /// Rodrigues: L_k = (1 / (2^k k!)) d^k/dx^k (x^2 - 1)^k, in exact rationals.
    fn rodrigues(k: usize) -> Vec<Ratio<i128>> {
        let mut poly = vec![Ratio::from_integer(0i128); 2 * k + 1];
        let mut binom: i128 = 1;
        for i in 0..=k {
            // (x^2 - 1)^k = sum_i C(k, i) x^(2i) (-1)^(k-i)
            let sign = if (k - i).is_multiple_of(2) { 1 } else { -1 };
            poly[2 * i] = Ratio::from_integer(sign * binom);
            binom = binom * (k - i) as i128 / (i + 1) as i128;
        }
        for _ in 0..k {
            poly = poly.iter().enumerate().skip(1).map(|(d, c)| c * d as i128).collect();
        }
        let mut denom: i128 = 1 << k;
        for i in 2..=k {
            denom *= i as i128;
        }
        poly.into_iter().map(|c| c / denom).collect()
    }

    #[test]
    fn legendre_coefficients_small() {
        assert_eq!(legendre_poly_coeffs(0), vec![1.0]);
        assert_eq!(legendre_poly_coeffs(1), vec![0.0, 1.0]);
        assert_eq!(legendre_poly_coeffs(2), vec![-0.5, 0.0, 1.5]);
    }

    #[test]
    fn legendre_coefficients_match_rodrigues() {
        for k in 0..=10 {
            let exact = rodrigues(k);
            let got = legendre_poly_coeffs(k);
            assert_eq!(exact.len(), got.len());
            for (e, g) in exact.iter().zip(&got) {
                let ef = *e.numer() as f64 / *e.denom() as f64;
                assert!((ef - g).abs() <= 1e-12 * ef.abs().max(1.0), "k = {k}: {ef} vs {g}");
            }
        }
    }

    #[test]
    fn parse_names() {
        for kind in TransformKind::ALL {
            assert_eq!(kind.name().parse::<TransformKind>().unwrap(), kind);
        }
        assert!("fft".parse::<TransformKind>().is_err());
    }
}
