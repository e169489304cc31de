//! The two-step hyperparameter search: a coarse half-decade sweep picks
//! a center, a fine tenth-decade sweep refines it, and the winner is the
//! smallest tuning ambiguity among coverage-controlled candidates.
//!
//! ```bash
//! cargo run --example grid_search
//! ```

use csvm::datagen::gen_example3;
use csvm::tuning::{grid_search, SearchMethod};
use csvm::types::NoncoverageTargets;
use csvm::KernelSpec;

fn main() -> csvm::Result<()> {
    let train = gen_example3(120, 4, 31)?;
    let tune = gen_example3(120, 4, 32)?;
    let targets = NoncoverageTargets::new(0.05, 0.05)?;

    let outcome = grid_search(
        &train,
        &tune,
        &targets,
        &[KernelSpec::gaussian(1.0)?, KernelSpec::gaussian(2.0)?],
        &SearchMethod::Csvm { adaptive: false },
    )?;

    println!(
        "evaluated {} candidates ({} failed to train)",
        outcome.trace.len(),
        outcome.failures.len()
    );
    let best = &outcome.best;
    println!(
        "winner: kernel {:?}, lambda {:.3e}",
        best.kernel.unwrap(),
        
        best.lambda.unwrap()
    );
    println!(
        "tuning report: noncoverage ({:.4}, {:.4}), ambiguity {:.4}",
        best.tuning_report.noncoverage_neg.unwrap(),
        best.tuning_report.noncoverage_pos.unwrap(),
        best.tuning_report.ambiguity
    );

    // a handful of trace entries around the winner
    for candidate in outcome.trace.iter().step_by(7) {
        println!(
            "  {:?} lambda {:>9.3e}: tuning ambiguity {:.4}",
            candidate.stage,
            candidate.lambda.unwrap(),
            candidate.report.ambiguity
        );
    }
    Ok(())
}
