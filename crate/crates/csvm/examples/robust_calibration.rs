//! Replace the solved margin band with class-wise order-statistic
//! thresholds from a held-out tuning split. On the tuning set itself the
//! non-coverage of each class is then at most its target — exactly, not
//! in expectation.
//!
//! ```bash
//! cargo run --example robust_calibration
//! ```

use csvm::datagen::gen_example1;
use csvm::inference::{evaluate, predict_batch, robust_thresholds, Scorer};
use csvm::trainer::{fit_csvm, TrainConfig};
use csvm::types::NoncoverageTargets;
use csvm::KernelSpec;

fn main() -> csvm::Result<()> {
    let train = gen_example1(300, 10, 21)?;
    let tune = gen_example1(600, 10, 22)?;
    let test = gen_example1(5000, 10, 23)?;
    let targets = NoncoverageTargets::new(0.05, 0.05)?;

    let (model, _) = fit_csvm(&train, &TrainConfig::new(0.01, targets, KernelSpec::Linear))?;

    let tune_scores = model.score_batch(&tune)?;
    let thresholds = robust_thresholds(&tune_scores, tune.labels(), &targets)?;
    println!(
        "calibrated thresholds: t_neg = {:.4}, t_pos = {:.4} (margin band was ±{:.4})",
        thresholds.t_neg, thresholds.t_pos, model.margin
    );

    let tune_report = evaluate(
        &predict_batch(&tune_scores, &thresholds),
        tune.labels(),
        &targets,
    )?;
    println!(
        "tuning split (guaranteed): noncoverage = ({:.4}, {:.4})",
        tune_report.noncoverage_neg.unwrap(),
        tune_report.noncoverage_pos.unwrap()
    );

    let test_scores = model.score_batch(&test)?;
    let test_report = evaluate(
        &predict_batch(&test_scores, &thresholds),
        test.labels(),
        &targets,
    )?;
    println!(
        "test split: noncoverage = ({:.4}, {:.4}), ambiguity = {:.4}, success = {}",
        test_report.noncoverage_neg.unwrap(),
        test_report.noncoverage_pos.unwrap(),
        test_report.ambiguity,
        test_report.success
    );
    Ok(())
}
