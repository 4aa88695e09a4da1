//! Matvec timing: median of repeated batches after warmup, and least-squares
//! slopes of `log t` against `log N`.
//!
//! Every buffer is allocated before timing starts. A batch runs enough calls
//! to last at least [`MIN_BATCH_NS`], and records report per-call time. The
//! `noop` operation times an empty call through the same loop and serves as
//! the harness-overhead calibration.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::butterfly::ButterflyStack;
use crate::exact::{fft_bp, BPModuleExact};
use crate::numeric::{dense_matvec_into, DenseMatrix, Rng, C64};
use crate::{checked_log2, Error, Field, Result};

pub const MIN_REPETITIONS: usize = 31;
pub const WARMUP_CALLS: usize = 5;
/// Lower bound on the duration of one timed batch.
pub const MIN_BATCH_NS: f64 = 200_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchOp {
    Noop,
    ButterflyMatvec,
    DenseMatvec,
    ExactFftMatvec,
}

impl BenchOp {
    pub const TIMED: [BenchOp; 3] = [Self::ButterflyMatvec, Self::DenseMatvec, Self::ExactFftMatvec];

    pub fn name(self) -> &'static str {
        match self {
            Self::Noop => "noop",
            Self::ButterflyMatvec => "butterfly_matvec",
            Self::DenseMatvec => "dense_matvec",
            Self::ExactFftMatvec => "exact_fft_matvec",
        }
    }
}

impl fmt::Display for BenchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Noop, Self::ButterflyMatvec, Self::DenseMatvec, Self::ExactFftMatvec]
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bench operation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub operations: Vec<BenchOp>,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: (4..=13).map(|k| 1 << k).collect(),
            operations: vec![BenchOp::Noop, BenchOp::ButterflyMatvec, BenchOp::DenseMatvec, BenchOp::ExactFftMatvec],
            repetitions: MIN_REPETITIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub operation: BenchOp,
    #[serde(rename = "N")]
    pub n: usize,
    /// Per call.
    pub median_ns: f64,
    pub iqr_ns: f64,
    pub repetitions: usize,
    pub calls_per_repetition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub operation: BenchOp,
    pub slope: f64,
    pub intercept: f64,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub slopes: Vec<SlopeFit>,
}

impl BenchReport {
    pub fn records_csv(&self) -> String {
        let mut s = String::from("operation,N,median_ns,iqr_ns,repetitions,calls_per_repetition\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{:.1},{:.1},{},{}\n",
                r.operation, r.n, r.median_ns, r.iqr_ns, r.repetitions, r.calls_per_repetition
            ));
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("operation,slope,intercept,N_min,N_max\n");
        for f in &self.slopes {
            s.push_str(&format!("{},{:.4},{:.4},{},{}\n", f.operation, f.slope, f.intercept, f.n_min, f.n_max));
        }
        s
    }

    pub fn median(&self, op: BenchOp, n: usize) -> Option<f64> {
        self.records.iter().find(|r| r.operation == op && r.n == n).map(|r| r.median_ns)
    }

    pub fn slope(&self, op: BenchOp) -> Option<f64> {
        self.slopes.iter().find(|f| f.operation == op).map(|f| f.slope)
    }
}

/// Pre-built inputs for one `(operation, N)` cell.
enum Kernel {
    Noop,
    Butterfly(ButterflyStack),
    Dense(DenseMatrix),
    Fft(BPModuleExact),
}

impl Kernel {
    fn build(op: BenchOp, n: usize, rng: &mut Rng) -> Result<Self> {
        Ok(match op {
            BenchOp::Noop => Kernel::Noop,
            BenchOp::ButterflyMatvec => Kernel::Butterfly(ButterflyStack::init_random(n, Field::Complex, rng)?),
            BenchOp::DenseMatvec => {
                let mut entries = Vec::with_capacity(n * n);
                for _ in 0..n * n {
                    entries.push(C64::new(rng.uniform() - 0.5, rng.uniform() - 0.5));
                }
                Kernel::Dense(DenseMatrix::from_entries(n, n, entries)?)
            }
            BenchOp::ExactFftMatvec => Kernel::Fft(fft_bp(n)?),
        })
    }

    #[inline]
    fn call(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Kernel::Noop => {}
            Kernel::Butterfly(b) => {
                y.copy_from_slice(x);
                b.apply_in_place(y);
            }
            Kernel::Dense(a) => dense_matvec_into(a, x, y).expect("sizes fixed at build time"),
            Kernel::Fft(m) => {
                m.permutation.apply_into(x, y).expect("sizes fixed at build time");
                m.butterfly.apply_in_place(y);
            }
        }
    }
}

fn time_batch(kernel: &Kernel, x: &[C64], y: &mut [C64], calls: usize) -> f64 {
    let start = Instant::now();
    for _ in 0..calls {
        kernel.call(black_box(x), black_box(&mut *y));
    }
    black_box(&*y);
    start.elapsed().as_nanos() as f64
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Times one cell on the calling thread.
pub fn bench_one(op: BenchOp, n: usize, repetitions: usize, seed: u64) -> Result<BenchRecord> {
    checked_log2(n, 2)?;
    if repetitions < MIN_REPETITIONS {
        return Err(Error::Config(format!("at least {MIN_REPETITIONS} repetitions required, got {repetitions}")));
    }
    let mut rng = Rng::new(seed);
    let kernel = Kernel::build(op, n, &mut rng)?;
    let x: Vec<C64> = (0..n).map(|_| C64::new(rng.uniform() - 0.5, rng.uniform() - 0.5)).collect();
    let mut y = vec![C64::new(0.0, 0.0); n];

    let single = {
        for _ in 0..WARMUP_CALLS {
            kernel.call(black_box(&x), black_box(&mut y));
        }
        time_batch(&kernel, &x, &mut y, 1).max(1.0)
    };
    let calls = ((MIN_BATCH_NS / single).ceil() as usize).clamp(1, 1 << 20);
    let mut per_call: Vec<f64> =
        (0..repetitions).map(|_| time_batch(&kernel, &x, &mut y, calls) / calls as f64).collect();
    per_call.sort_by(f64::total_cmp);
    Ok(BenchRecord {
        operation: op,
        n,
        median_ns: quantile(&per_call, 0.5),
        iqr_ns: quantile(&per_call, 0.75) - quantile(&per_call, 0.25),
        repetitions,
        calls_per_repetition: calls,
    })
}

/// Least-squares fit of `ln(median_ns) = slope * ln(N) + intercept` over
/// records of `op` with `n_min <= N <= n_max`.
pub fn fit_slope(records: &[BenchRecord], op: BenchOp, n_min: usize, n_max: usize) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.operation == op && r.n >= n_min && r.n <= n_max && r.median_ns > 0.0)
        .map(|r| ((r.n as f64).ln(), r.median_ns.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Some(SlopeFit { operation: op, slope, intercept: my - slope * mx, n_min, n_max })
}

/// Every `(operation, N)` cell in order, then one slope per timed operation
/// over the `N >= 256` records.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut records = Vec::new();
    for &n in &cfg.sizes {
        for (i, &op) in cfg.operations.iter().enumerate() {
            records.push(bench_one(op, n, cfg.repetitions, cfg.seed ^ (n as u64) << 8 ^ i as u64)?);
        }
    }
    let n_max = cfg.sizes.iter().copied().max().unwrap_or(0);
    let slopes = cfg
        .operations
        .iter()
        .filter(|&&op| op != BenchOp::Noop)
        .filter_map(|&op| fit_slope(&records, op, 256, n_max))
        .collect();
    Ok(BenchReport { records, slopes })
}
