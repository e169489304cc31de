//! Two-step hyperparameter search.
//!
//! For every kernel hyperparameter, a coarse sweep over 25
//! half-decade-spaced penalties picks a center, then a fine sweep of 11
//! tenth-decade steps around it. Each candidate is trained on the
//! training split, calibrated on the tuning split, and scored by its
//! tuning ambiguity; calibration already guarantees the tuning
//! non-coverage targets, so the winner is simply the smallest ambiguity,
//! with ties resolved toward the stronger penalty.

use serde::Serialize;

use crate::baselines::{fit_knn, fit_ridge_logistic};
use crate::error::{Error, Result};
use crate::inference::{evaluate, predict_batch, robust_thresholds, EvalReport, Scorer, Thresholds};
use crate::kernel::KernelSpec;
use crate::trainer::{fit_csvm, TrainConfig};
use crate::types::{Dataset, NoncoverageTargets};

/// The 25-point coarse penalty grid `10^-8, 10^-7.5, ..., 10^4`.
pub fn coarse_lambda_grid() -> Vec<f64> {
    (0..=24).map(|k| 10f64.powf(-8.0 + 0.5 * k as f64)).collect()
}

/// The 11-point fine grid `center * 10^-0.5, ..., center * 10^0.5`.
pub fn fine_lambda_grid(center: f64) -> Vec<f64> {
    (0..=10)
        .map(|k| center * 10f64.powf(-0.5 + 0.1 * k as f64))
        .collect()
}

/// Bandwidth grid `10^-0.5 .. 10^1` used for the Gaussian kernel.
pub fn gaussian_rho_grid() -> Vec<f64> {
    [-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|e| 10f64.powf(*e))
        .collect()
}

/// Degrees tried for the polynomial kernel.
pub fn polynomial_degree_grid() -> Vec<u32> {
    vec![2, 3, 4]
}

/// Which learner the search drives.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchMethod {
    Csvm { adaptive: bool },
    RidgeLogistic,
    Knn { k_grid: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchStage {
    Coarse,
    Fine,
    Single,
}

/// One evaluated candidate, recorded in grid order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchCandidate {
    pub stage: SearchStage,
    pub kernel: Option<KernelSpec>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub thresholds: Thresholds,
    pub report: EvalReport,
}

/// The winning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestConfig {
    pub kernel: Option<KernelSpec>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub tuning_report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best: BestConfig,
    pub trace: Vec<SearchCandidate>,
    /// Candidates that failed to train, with their errors.
    pub failures: Vec<String>,
}

impl BestConfig {
    /// Training configuration reproducing the winning SVM candidate.
    pub fn to_train_config(
        &self,
        targets: NoncoverageTargets,
        adaptive: bool,
    ) -> Result<TrainConfig> {
        let kernel = self.kernel.ok_or_else(|| {
            Error::InvalidArgument("the winning candidate has no kernel".into())
        })?;
        let lambda = self.lambda.ok_or_else(|| {
            Error::InvalidArgument("the winning candidate has no penalty".into())
        })?;
        let mut config = TrainConfig::new(lambda, targets, kernel);
        config.adaptive = adaptive;
        Ok(config)
    }
}

/// Runs the two-step search for `method` over `kernel_grid`.
///
/// For the k-nearest-neighbour baseline the penalty sweep degenerates to
/// one candidate per `k`, tied toward larger `k`.
pub fn grid_search(
    train: &Dataset,
    tune: &Dataset,
    targets: &NoncoverageTargets,
    kernel_grid: &[KernelSpec],
    method: &SearchMethod,
) -> Result<SearchOutcome> {
    train.require_both_classes()?;
    tune.require_both_classes()?;

    let mut trace: Vec<SearchCandidate> = Vec::new();
    let mut failures: Vec<String> = Vec::new();

    match method {
        SearchMethod::Csvm { adaptive } => {
            if kernel_grid.is_empty() {
                return Err(Error::InvalidArgument("the kernel grid is empty".into()));
            }
            for &kernel in kernel_grid {
                let run = |lambda: f64,
                           stage: SearchStage,
                           trace: &mut Vec<SearchCandidate>,
                           failures: &mut Vec<String>| {
                    let mut config = TrainConfig::new(lambda, *targets, kernel);
                    config.adaptive = *adaptive;
                    match fit_csvm(train, &config) {
                        Ok((model, _)) => match calibrated_report(&model, tune, targets) {
                            Ok((thresholds, report)) => {
                                trace.push(SearchCandidate {
                                    stage,
                                    kernel: Some(kernel),
                                    lambda: Some(lambda),
                                    k: None,
                                    thresholds,
                                    report,
                                });
                            }
                            Err(err) => failures.push(format!("{kernel} lambda={lambda}: {err}")),
                        },
                        Err(err) => failures.push(format!("{kernel} lambda={lambda}: {err}")),
                    }
                };
                let coarse_start = trace.len();
                for lambda in coarse_lambda_grid() {
                    run(lambda, SearchStage::Coarse, &mut trace, &mut failures);
                }
                let center = pick_best(&trace[coarse_start..]).map(|c| c.lambda.unwrap());
                if let Some(center) = center {
                    for lambda in fine_lambda_grid(center) {
                        run(lambda, SearchStage::Fine, &mut trace, &mut failures);
                    }
                }
            }
        }
        SearchMethod::RidgeLogistic => {
            let run = |lambda: f64,
                       stage: SearchStage,
                       trace: &mut Vec<SearchCandidate>,
                       failures: &mut Vec<String>| {
                match fit_ridge_logistic(train, lambda, 200, 1e-8) {
                    Ok(model) => match calibrated_report(&model, tune, targets) {
                        Ok((thresholds, report)) => trace.push(SearchCandidate {
                            stage,
                            kernel: None,
                            lambda: Some(lambda),
                            k: None,
                            thresholds,
                            report,
                        }),
                        Err(err) => failures.push(format!("ridge lambda={lambda}: {err}")),
                    },
                    Err(err) => failures.push(format!("ridge lambda={lambda}: {err}")),
                }
            };
            for lambda in coarse_lambda_grid() {
                run(lambda, SearchStage::Coarse, &mut trace, &mut failures);
            }
            let center = pick_best(&trace).map(|c| c.lambda.unwrap());
            if let Some(center) = center {
                for lambda in fine_lambda_grid(center) {
                    run(lambda, SearchStage::Fine, &mut trace, &mut failures);
                }
            }
        }
        SearchMethod::Knn { k_grid } => {
            if k_grid.is_empty() {
                return Err(Error::InvalidArgument("the k grid is empty".into()));
            }
            for &k in k_grid {
                match fit_knn(train, k) {
                    Ok(model) => match calibrated_report(&model, tune, targets) {
                        Ok((thresholds, report)) => trace.push(SearchCandidate {
                            stage: SearchStage::Single,
                            kernel: None,
                            lambda: None,
                            k: Some(k),
                            thresholds,
                            report,
                        }),
                        Err(err) => failures.push(format!("knn k={k}: {err}")),
                    },
                    Err(err) => failures.push(format!("knn k={k}: {err}")),
                }
            }
        }
    }

    let best = pick_best(&trace).cloned().ok_or_else(|| {
        Error::Training(format!(
            "every candidate failed to train: {}",
            failures.join("; ")
        ))
    })?;
    Ok(SearchOutcome {
        best: BestConfig {
            kernel: best.kernel,
            lambda: best.lambda,
            k: best.k,
            tuning_report: best.report,
        },
        trace,
        failures,
    })
}

/// Calibrate a scorer on the tuning split and evaluate it there.
pub fn calibrated_report<S: Scorer>(
    model: &S,
    tune: &Dataset,
    targets: &NoncoverageTargets,
) -> Result<(Thresholds, EvalReport)> {
    let scores = model.score_batch(tune)?;
    let thresholds = robust_thresholds(&scores, tune.labels(), targets)?;
    let predictions = predict_batch(&scores, &thresholds);
    let report = evaluate(&predictions, tune.labels(), targets)?;
    Ok((thresholds, report))
}

/// Smallest tuning ambiguity among coverage-controlled candidates; ties
/// break toward the larger penalty (or larger k), then grid order.
fn pick_best<'a>(candidates: &'a [SearchCandidate]) -> Option<&'a SearchCandidate> {
    candidates
        .iter()
        .filter(|c| c.report.success)
        .fold(None, |best: Option<&'a SearchCandidate>, c| match best {
            None => Some(c),
            Some(b) => {
                let better = c.report.ambiguity < b.report.ambiguity
                    || (c.report.ambiguity == b.report.ambiguity
                        && (c.lambda.unwrap_or(0.0) > b.lambda.unwrap_or(0.0)
                            || c.k.unwrap_or(0) > b.k.unwrap_or(0)));
                if better {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        })
}
