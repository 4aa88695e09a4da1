//! Legendre polynomials two ways: the exact sparse transition-matrix
//! factorization, and a learned BP fit of the dense Legendre matrix compared
//! with equal-budget baselines.

use bpfactor::baselines::baselines_for;
use bpfactor::exact::{legendre_params, orthopoly_via_factors};
use bpfactor::train::{search, SearchConfig, TrainTask};
use bpfactor::zoo::legendre_poly_coeffs;
use bpfactor::{Field, TransformKind, TransformSpec};

fn main() -> bpfactor::Result<()> {
    let n = 8;
    let polys = orthopoly_via_factors(&legendre_params(n), n)?;
    let mut worst: f64 = 0.0;
    for (k, p) in polys.iter().enumerate() {
        let want = legendre_poly_coeffs(k);
        for i in 0..p.len().max(want.len()) {
            worst = worst.max((p.get(i).unwrap_or(&0.0) - want.get(i).unwrap_or(&0.0)).abs());
        }
    }
    println!("P_0..P_{} from transition factors: max coefficient error {worst:.1e}", n - 1);

    let spec = TransformSpec::new(TransformKind::Legendre, n);
    let task = TrainTask::for_spec(&spec, Field::Complex)?;
    let learned = search(&task, &SearchConfig::default())?;
    println!("learned BP RMSE {:.3e}", learned.best.final_rmse);
    for row in baselines_for(&spec)? {
        println!("{:<15} budget {:3} RMSE {:.3e}", row.method.name(), row.budget, row.rmse);
    }
    Ok(())
}
