//! Train a confidence-set SVM on synthetic Gaussian data and classify a
//! few probes through the solved margin band.
//!
//! ```bash
//! cargo run --example train_and_predict
//! ```

use csvm::datagen::gen_example1;
use csvm::inference::score;
use csvm::trainer::{fit_csvm, TrainConfig};
use csvm::types::{classify_by_margin, NoncoverageTargets};
use csvm::KernelSpec;

fn main() -> csvm::Result<()> {
    let train = gen_example1(200, 10, 7)?;
    let targets = NoncoverageTargets::new(0.05, 0.05)?;
    let config = TrainConfig::new(0.01, targets, KernelSpec::Linear);

    let (model, trace) = fit_csvm(&train, &config)?;
    println!(
        "trained in {} outer pass(es): margin = {:.4}, intercept = {:.4}",
        trace.iterations.len(),
        model.margin,
        model.intercept
    );

    // scores beyond ±margin are definite; the band in between is ambiguous
    let probes: [[f64; 10]; 3] = [
        [-2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // negative mean
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],  // positive mean
        [-0.3, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // in between
    ];
    for probe in &probes {
        let f = score(&model, probe)?;
        let decision = classify_by_margin(f, model.margin)?;
        println!("f({:>5.1}, {:>4.1}, ...) = {f:+.3} -> {decision:?}", probe[0], probe[1]);
    }
    Ok(())
}
