//! Analytic gradients of the training objective against central differences.

use bpfactor::train::gradcheck_suite;

fn main() -> bpfactor::Result<()> {
    let rows = gradcheck_suite(8, 16, 1e-5, 0)?;
    for r in &rows {
        println!(
            "#{:<2} N={:<2} {:<5} {:?} tied={:<5} ew={:<3} params={:<4} rel {:.1e}",
            r.instance,
            r.n,
            r.shape.name(),
            r.field,
            r.tied,
            r.entropy_weight,
            r.params,
            r.max_rel_error
        );
    }
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    println!("worst relative error {worst:.1e}");
    Ok(())
}
