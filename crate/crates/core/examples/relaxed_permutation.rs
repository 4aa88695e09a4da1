//! A relaxed permutation stack: mixture probabilities per level, the dense
//! doubly-stochastic matrix it represents, and what rounding produces.

use bpfactor::{bit_reversal, RelaxedPermLevel, RelaxedPermutationStack, Rng};

fn main() -> bpfactor::Result<()> {
    let n = 8;
    let mut rng = Rng::new(3);
    let soft = RelaxedPermutationStack::init_random(n, false, 1.0, &mut rng)?;
    for (k, lvl) in soft.stored_levels().iter().enumerate() {
        let [a, b, c] = lvl.probabilities();
        println!("level {k} (chunk {:2}): p_a {a:.3} p_b {b:.3} p_c {c:.3}", soft.chunk(k));
    }
    println!("entropy {:.3}, rounding distance {:.3}", soft.entropy(), soft.rounding_distance());

    let dense = soft.expand_dense();
    println!("relaxed matrix:");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.2}", dense.get(i, j).re)).collect();
        println!("  {}", row.join(" "));
    }
    let (hard, _) = soft.harden();
    println!("rounded: {:?}", hard.indices());

    // Separating even from odd indices at every level is bit reversal.
    let evens = RelaxedPermutationStack::new(n, true, vec![RelaxedPermLevel::hard(true, false, false)])?;
    println!("a at every level: {:?}", evens.harden().0.indices());
    println!("bit reversal:     {:?}", bit_reversal(n)?.indices());
    Ok(())
}
