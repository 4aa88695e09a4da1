//! Recover the FFT from the dense 8-point DFT matrix by random search over
//! BP models, then compare the learned permutation with bit reversal.

use bpfactor::train::{search, SearchConfig, TrainTask};
use bpfactor::{bit_reversal, Field, TransformKind, TransformSpec};

fn main() -> bpfactor::Result<()> {
    let n = 8;
    let task = TrainTask::for_spec(&TransformSpec::new(TransformKind::Dft, n), Field::Complex)?;
    let result = search(&task, &SearchConfig::default())?;
    let best = &result.best;
    println!("best RMSE {:.2e} after {} steps (trial {})", best.final_rmse, best.steps_used, result.best_index);
    for t in &result.trials {
        println!(
            "  trial {:2} lr {:.2e} tied {:5} rung0 {:.2e} best {:.2e}",
            t.index, t.learning_rate, t.tie_logits, t.rung0_rmse, t.best_rmse
        );
    }
    let learned = &best.hard_permutations[0];
    println!("learned permutation {:?}", learned.indices());
    println!("bit reversal        {:?}", bit_reversal(n)?.indices());
    Ok(())
}
