//! Times butterfly, dense and FFT matrix-vector products and fits log-log
//! slopes. Pass `--release`; debug timings are meaningless.

use bpfactor::bench::{run_bench, BenchConfig};

fn main() -> bpfactor::Result<()> {
    let cfg = BenchConfig { sizes: (6..=11).map(|k| 1 << k).collect(), repetitions: 11, ..Default::default() };
    let report = run_bench(&cfg)?;
    print!("{}", report.records_csv());
    println!();
    print!("{}", report.slopes_csv());
    Ok(())
}
