//! Sparse, low-rank and sparse + low-rank approximations of transforms at the
//! parameter budget of the matching butterfly model.

use bpfactor::baselines::{baseline_table, table_csv};
use bpfactor::{TransformKind, TransformSpec};

fn main() -> bpfactor::Result<()> {
    let specs: Vec<TransformSpec> =
        [TransformKind::Dft, TransformKind::Dct, TransformKind::Legendre, TransformKind::Randn]
            .into_iter()
            .flat_map(|k| [16, 32].map(|n| TransformSpec::new(k, n)))
            .collect();
    print!("{}", table_csv(&baseline_table(&specs)?));
    Ok(())
}
