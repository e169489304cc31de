//! Plug-in baselines feed the same calibration path as the SVM: any
//! monotone score source gets the identical finite-sample tuning
//! guarantee, so methods compare purely on ambiguity.
//!
//! ```bash
//! cargo run --example baselines
//! ```

use csvm::baselines::{fit_knn, fit_ridge_logistic};
use csvm::datagen::gen_example2;
use csvm::inference::{evaluate, predict_batch, robust_thresholds, Scorer};
use csvm::trainer::{fit_csvm, TrainConfig};
use csvm::types::{Dataset, NoncoverageTargets};
use csvm::KernelSpec;

fn report_for(
    name: &str,
    scorer: &dyn Scorer,
    tune: &Dataset,
    test: &Dataset,
    targets: &NoncoverageTargets,
) -> csvm::Result<()> {
    let tune_scores = scorer.score_batch(tune)?;
    let thresholds = robust_thresholds(&tune_scores, tune.labels(), targets)?;
    let test_scores = scorer.score_batch(test)?;
    let report = evaluate(&predict_batch(&test_scores, &thresholds), test.labels(), targets)?;
    println!(
        "{name:<18} noncoverage ({:.4}, {:.4})  ambiguity {:.4}",
        report.noncoverage_neg.unwrap(),
        report.noncoverage_pos.unwrap(),
        report.ambiguity
    );
    Ok(())
}

fn main() -> csvm::Result<()> {
    let train = gen_example2(200, 4, 3000)?;
    let tune = gen_example2(400, 4, 3001)?;
    let test = gen_example2(4000, 4, 3002)?;
    let targets = NoncoverageTargets::new(0.1, 0.1)?;

    let (svm, _) = fit_csvm(&train, &TrainConfig::new(0.1, targets, KernelSpec::polynomial(2)?))?;
    let ridge = fit_ridge_logistic(&train, 0.01, 200, 1e-8)?;
    let knn = fit_knn(&train, 15)?;

    report_for("csvm (poly 2)", &svm, &tune, &test, &targets)?;
    report_for("ridge logistic", &ridge, &tune, &test, &targets)?;
    report_for("15-nn", &knn, &tune, &test, &targets)?;
    Ok(())
}
