//! Numerical check that every exact construction reproduces its dense
//! formula matrix.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{circulant_bp2, dct_bp2, dst_bp2, fft_bp, hadamard_bp, ifft_bp, toeplitz_bp2r2, BPProductExact};
use crate::numeric::{DenseMatrix, Rng, C64};
use crate::zoo::{circulant, seeded_unit_filter, toeplitz, Scaling, TransformKind, TransformSpec};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactOp {
    Dft,
    InverseDft,
    Hadamard,
    Circulant,
    Dct,
    Dst,
    Toeplitz,
}

impl ExactOp {
    pub const ALL: [ExactOp; 7] =
        [Self::Dft, Self::InverseDft, Self::Hadamard, Self::Circulant, Self::Dct, Self::Dst, Self::Toeplitz];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dft => "dft",
            Self::InverseDft => "inverse_dft",
            Self::Hadamard => "hadamard",
            Self::Circulant => "circulant",
            Self::Dct => "dct",
            Self::Dst => "dst",
            Self::Toeplitz => "toeplitz",
        }
    }

    /// Max-abs tolerance against the formula matrix.
    pub fn threshold(self) -> f64 {
        match self {
            Self::Dft | Self::InverseDft | Self::Hadamard => 1e-10,
            _ => 1e-9,
        }
    }
}

impl fmt::Display for ExactOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Perturbs the outermost twiddle `D1[0]` of the leftmost module before
/// expansion, so the suite can be shown to detect a broken construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub op: ExactOp,
    pub n: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub sizes: Vec<usize>,
    /// Largest Toeplitz size (its inner circulant is twice as large).
    pub toeplitz_max: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { sizes: (1..=10).map(|m| 1 << m).collect(), toeplitz_max: 512, seed: 0, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub op: ExactOp,
    #[serde(rename = "N")]
    pub n: usize,
    /// Expansion factor of the product (2 for Toeplitz).
    pub r: usize,
    pub max_abs_error: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub elapsed_s: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn worst(&self, op: ExactOp) -> Option<&VerifyRow> {
        self.rows.iter().filter(|r| r.op == op).max_by(|a, b| a.max_abs_error.total_cmp(&b.max_abs_error))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("op,N,r,max_abs_error,threshold,pass\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{:.6e},{:e},{}\n", r.op, r.n, r.r, r.max_abs_error, r.threshold, r.pass));
        }
        s
    }
}

fn unit_random(len: usize, seed: u64) -> Result<Vec<C64>> {
    let mut rng = Rng::new(seed);
    let v: Vec<C64> = (0..len).map(|_| rng.complex_gaussian(0.5)).collect::<Result<_>>()?;
    let nrm = crate::numeric::norm2(&v);
    Ok(v.into_iter().map(|z| z / nrm).collect())
}

fn inverse_dft(n: usize) -> DenseMatrix {
    let s = 1.0 / n as f64;
    DenseMatrix::from_fn(n, n, |j, k| C64::from_polar(s, 2.0 * PI * ((j * k) % n) as f64 / n as f64))
}

fn raw(kind: TransformKind, n: usize) -> Result<DenseMatrix> {
    TransformSpec::new(kind, n).with_scaling(Scaling::Raw).generate()
}

/// Construction and its dense oracle for `op` at size `n`.
pub(crate) fn build(op: ExactOp, n: usize, seed: u64) -> Result<(BPProductExact, DenseMatrix)> {
    let single = |m| BPProductExact::new(vec![m], 1, false);
    Ok(match op {
        ExactOp::Dft => (single(fft_bp(n)?)?, raw(TransformKind::Dft, n)?),
        ExactOp::InverseDft => (single(ifft_bp(n)?)?, inverse_dft(n)),
        ExactOp::Hadamard => (single(hadamard_bp(n)?)?, raw(TransformKind::Hadamard, n)?),
        ExactOp::Dct => (dct_bp2(n)?, raw(TransformKind::Dct, n)?),
        ExactOp::Dst => (dst_bp2(n)?, raw(TransformKind::Dst, n)?),
        ExactOp::Circulant => {
            let h = seeded_unit_filter(n, seed)?;
            (circulant_bp2(&h)?, circulant(&h))
        }
        ExactOp::Toeplitz => {
            let t = unit_random(2 * n - 1, seed)?;
            (toeplitz_bp2r2(&t)?, toeplitz(&t)?)
        }
    })
}

/// Expands every construction over `opts.sizes` and compares to the dense
/// formula matrices.
pub fn verify_exact_suite(opts: &VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for op in ExactOp::ALL {
        for &n in &opts.sizes {
            if op == ExactOp::Toeplitz && n > opts.toeplitz_max {
                continue;
            }
            let (mut product, oracle) = build(op, n, opts.seed ^ n as u64)?;
            if let Some(f) = opts.fault.filter(|f| f.op == op && f.n == n) {
                let lvl = product.modules[0].butterfly.levels_mut().last_mut().expect("non-empty");
                lvl.diagonals_mut()[0][0] += C64::new(f.delta, 0.0);
            }
            let err = product.expand().max_abs_diff(&oracle)?;
            let threshold = op.threshold();
            rows.push(VerifyRow { op, n, r: product.r, max_abs_error: err, threshold, pass: err < threshold });
        }
    }
    Ok(VerifyReport { rows, elapsed_s: start.elapsed().as_secs_f64() })
}
