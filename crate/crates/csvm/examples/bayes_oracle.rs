//! The reference rule every method is measured against: conditional
//! class probabilities, Monte-Carlo thresholds meeting the coverage
//! targets, and the induced set-valued regions.
//!
//! ```bash
//! cargo run --example bayes_oracle
//! ```

use csvm::datagen::Scenario;
use csvm::oracle::{bayes_predict, bayes_thresholds, eta, mc_evaluate, three_sigma_band, BayesSpec};
use csvm::types::NoncoverageTargets;

fn main() -> csvm::Result<()> {
    let targets = NoncoverageTargets::new(0.05, 0.05)?;
    let spec = BayesSpec::new(Scenario::Example3, 2, 500_000, 1);

    // the donut's eta is piecewise constant in the radius
    for r in [0.4, 0.9, 1.0, 1.5, 2.5] {
        println!("eta at radius {r:.1}: {:.2}", eta(&spec, &[r, 0.0])?);
    }

    let thresholds = bayes_thresholds(&spec, &targets)?;
    println!(
        "thresholds on the probability scale: t_neg = {:.4}, t_pos = {:.4}",
        thresholds.t_neg, thresholds.t_pos
    );

    let spec = spec.with_thresholds(thresholds)?;
    for r in [0.3, 1.0, 1.8] {
        println!(
            "radius {r:.1} -> {:?}",
            bayes_predict(&spec, &[r, 0.0])?
        );
    }

    let report = mc_evaluate(&spec, &targets, 500_000, 2)?;
    println!(
        "fresh-draw coverage: ({:.4}, {:.4}), ambiguity {:.4} ± {:.4}",
        1.0 - report.noncoverage_neg.unwrap(),
        1.0 - report.noncoverage_pos.unwrap(),
        report.ambiguity,
        three_sigma_band(report.ambiguity, report.n_test)
    );
    Ok(())
}
