//! Finite-sample diagnostics: how far the realized non-coverage can sit
//! above the empirical constraint value, and the constants governing the
//! excess-ambiguity transfer and the per-class target tightening.
//!
//! ```bash
//! cargo run --example theory_calculators
//! ```

use csvm::oracle::{noncoverage_bound, theory_constants};
use csvm::types::TheoryParams;

fn main() -> csvm::Result<()> {
    let theory = TheoryParams::new(1.0, 1.0, 0.25, 0.05)?;

    println!("high-probability non-coverage bound at empirical value 0.02:");
    for n_j in [50usize, 100, 400, 1600, 6400] {
        let bound = noncoverage_bound(&theory, n_j, 0.02)?;
        println!("  n_j = {n_j:>5}: {bound:.4}");
    }

    let constants = theory_constants(&theory);
    println!(
        "excess-ambiguity transfer factor (margin gap {}): {:.4}",
        theory.margin_gap, constants.ambiguity_transfer
    );
    println!(
        "target tightening scale kappa (use alpha_j - kappa/sqrt(n_j)): {:.4}",
        constants.alpha_tightening
    );
    Ok(())
}
