//! Watch the adaptive reweighting loop: points with badly violated
//! margins get their constraint weight reduced toward the indicator
//! value, and the per-class constraint loads track the targets.
//!
//! ```bash
//! cargo run --example adaptive_weights
//! ```

use csvm::datagen::gen_example3;
use csvm::trainer::{compute_weights, fit_csvm, TrainConfig};
use csvm::types::NoncoverageTargets;
use csvm::KernelSpec;

fn main() -> csvm::Result<()> {
    let train = gen_example3(150, 4, 5)?;
    let targets = NoncoverageTargets::new(0.1, 0.1)?;
    let mut config = TrainConfig::new(1.0, targets, KernelSpec::gaussian(1.0)?);
    config.max_outer_iters = 6;
    config.weight_tol = 1e-4;

    let (model, trace) = fit_csvm(&train, &config)?;
    println!("pass  objective   margin  constraint(-1)  constraint(+1)  max|dw|");
    for (t, rec) in trace.iterations.iter().enumerate() {
        println!(
            "{t:>4}  {:>9.4}  {:>7.4}  {:>14.4}  {:>14.4}  {:>7.1e}",
            rec.objective, rec.margin, rec.constraint_neg, rec.constraint_pos, rec.weight_change
        );
    }
    println!(
        "stopped {} (weights settled: {})",
        if trace.converged_by_weights { "early" } else { "at the pass budget" },
        trace.converged_by_weights
    );

    let weights = compute_weights(&model, &train)?;
    let downweighted = weights.iter().filter(|&&w| w < 1.0).count();
    println!(
        "{downweighted} of {} points carry weight < 1 in the final model",
        train.n()
    );
    Ok(())
}
