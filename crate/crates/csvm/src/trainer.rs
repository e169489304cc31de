//! Full training: the adaptive-weight outer loop around dual assembly,
//! QP solve, and primal recovery.
//!
//! Weights start at one. After each pass the margin-dependent constraint
//! losses of the fitted model are turned into new weights
//! `w_i = 1 / max(1, (1 - eps - y_i f(x_i))_+)`, which pull the surrogate
//! coverage constraint toward the indicator it stands in for. The loop
//! stops when weights settle or the iteration budget runs out; no
//! convergence guarantee is claimed, so the trace exposes every pass.

use crate::error::{Error, Result};
use crate::inference;
use crate::kernel::{gram_matrix, KernelSpec};
use crate::qp::{assemble_dual, solve_qp, QpStatus};
use crate::recover::{kernel_part, recover_coefficients, solve_intercept_margin};
use crate::types::{CsvmModel, Dataset, NoncoverageTargets};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Price on the ambiguity slacks in the scaled primal objective.
    pub lambda: f64,
    pub targets: NoncoverageTargets,
    pub kernel: KernelSpec,
    /// When false, a single pass with unit weights is performed.
    pub adaptive: bool,
    pub max_outer_iters: usize,
    /// Outer loop stops once `max_i |w_i - w_i_prev|` falls below this.
    pub weight_tol: f64,
    pub qp_tol: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(lambda: f64, targets: NoncoverageTargets, kernel: KernelSpec) -> Self {
        TrainConfig {
            lambda,
            targets,
            kernel,
            adaptive: true,
            max_outer_iters: 5,
            weight_tol: 1e-3,
            qp_tol: 1e-8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.max_outer_iters < 1 {
            return Err(Error::InvalidArgument(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        if !(self.weight_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "weight_tol must be positive".into(),
            ));
        }
        if !(self.qp_tol > 0.0) {
            return Err(Error::InvalidArgument("qp_tol must be positive".into()));
        }
        self.kernel.validate()
    }
}

/// One outer pass of the training loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    /// Primal objective `1/2 c'Kc + lambda * sum xi` of the fitted pass.
    pub objective: f64,
    pub margin: f64,
    /// Per-class weighted constraint loads, already divided by `n_j`.
    pub constraint_neg: f64,
    pub constraint_pos: f64,
    /// `max_i |w_i^(t) - w_i^(t-1)}|` between this pass's weights and the next.
    pub weight_change: f64,
    pub qp_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct TrainingTrace {
    pub iterations: Vec<IterationRecord>,
    /// True when the loop exited because weights settled.
    pub converged_by_weights: bool,
    /// Set when a later pass failed and the previous model was returned.
    pub fallback_to_previous: bool,
}

/// Adaptive constraint weights for a fitted model on its training data:
/// `w_i = 1 / max(1, (1 - eps - y_i f(x_i))_+)`, always in (0, 1].
pub fn compute_weights(model: &CsvmModel, data: &Dataset) -> Result<Vec<f64>> {
    let mut weights = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let f = inference::score(model, data.row(i))?;
        weights.push(weight_from_margin(f64::from(data.label(i)) * f, model.margin));
    }
    Ok(weights)
}

fn weight_from_margin(margin_value: f64, eps: f64) -> f64 {
    let loss = (1.0 - eps - margin_value).max(0.0);
    1.0 / loss.max(1.0)
}

/// Trains a confidence-set SVM.
///
/// Fails with a training error when the very first pass is infeasible;
/// a later infeasible pass falls back to the previous model and flags
/// the trace instead.
pub fn fit_csvm(data: &Dataset, config: &TrainConfig) -> Result<(CsvmModel, TrainingTrace)> {
    config.validate()?;
    data.require_both_classes()?;

    let n = data.n();
    let gram = gram_matrix(&config.kernel, data)?;
    let n_neg = data.n_neg() as f64;
    let n_pos = data.n_pos() as f64;

    let max_passes = if config.adaptive {
        config.max_outer_iters
    } else {
        1
    };
    let mut weights = vec![1.0; n];
    let mut trace = TrainingTrace::default();
    let mut previous: Option<CsvmModel> = None;

    for pass in 0..max_passes {
        let pass_result = (|| -> Result<(CsvmModel, f64, usize)> {
            let problem = assemble_dual(&gram, data.labels(), &weights, config.lambda, &config.targets)?;
            let solution = solve_qp(&problem, config.qp_tol)?;
            match solution.status {
                QpStatus::Optimal => {}
                QpStatus::Infeasible => {
                    return Err(Error::Infeasible(
                        "the dual reported infeasibility; the non-coverage targets are \
                         too strict for this data under the current weights"
                            .into(),
                    ));
                }
                QpStatus::MaxIter => {
                    return Err(Error::Numerical(format!(
                        "QP did not converge: worst scaled residual {:.3e}",
                        solution.kkt_residuals.max()
                    )));
                }
            }
            let coefficients = recover_coefficients(&solution, data.labels())?;
            let h = kernel_part(&gram, &coefficients);
            let fit = solve_intercept_margin(
                &h,
                data.labels(),
                &weights,
                config.lambda,
                &config.targets,
            )?;

            let mut quad = 0.0;
            for i in 0..n {
                quad += coefficients[i] * h[i];
            }
            let objective = 0.5 * quad + config.lambda * fit.objective;
            let model = CsvmModel {
                coefficients,
                intercept: fit.intercept,
                margin: fit.margin,
                kernel: config.kernel,
                support: data.clone(),
                weights_final: weights.clone(),
            };
            Ok((model, objective, solution.iterations))
        })();

        let (model, objective, qp_iterations) = match pass_result {
            Ok(out) => out,
            Err(err) => {
                if pass == 0 {
                    return Err(Error::Training(format!("targets infeasible: {err}")));
                }
                trace.fallback_to_previous = true;
                let model = previous.expect("previous pass stored a model");
                return Ok((model, trace));
            }
        };

        // Loads of the weighted coverage constraints, recomputed from the
        // recovered model's scores.
        let mut load_neg = 0.0;
        let mut load_pos = 0.0;
        let mut next_weights = Vec::with_capacity(n);
        for i in 0..n {
            let f = inference::score(&model, data.row(i))?;
            let margin_value = f64::from(data.label(i)) * f;
            let eta = (1.0 - model.margin - margin_value).max(0.0);
            if data.label(i) == 1 {
                load_pos += weights[i] * eta;
            } else {
                load_neg += weights[i] * eta;
            }
            next_weights.push(weight_from_margin(margin_value, model.margin));
        }
        let weight_change = next_weights
            .iter()
            .zip(&weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        trace.iterations.push(IterationRecord {
            objective,
            margin: model.margin,
            constraint_neg: load_neg / n_neg,
            constraint_pos: load_pos / n_pos,
            weight_change,
            qp_iterations,
        });

        let settled = weight_change < config.weight_tol;
        if !config.adaptive || pass + 1 == max_passes || settled {
            trace.converged_by_weights = settled && config.adaptive;
            return Ok((model, trace));
        }
        previous = Some(model);
        weights = next_weights;
    }
    unreachable!("the loop always returns from its final pass");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen;
    use crate::qp::VariableLayout;

    fn small_dataset() -> Dataset {
        // two slightly overlapping clusters in the plane
        let rows: Vec<[f64; 2]> = vec![
            [-1.2, 0.3],
            [-0.8, -0.4],
            [-1.5, 0.1],
            [-0.2, 0.2],
            [-0.9, 0.9],
            [1.1, -0.2],
            [0.7, 0.5],
            [1.4, 0.1],
            [0.3, -0.3],
            [0.8, -0.8],
        ];
        let labels = vec![-1i8, -1, -1, -1, -1, 1, 1, 1, 1, 1];
        let features = rows.iter().flatten().copied().collect();
        Dataset::new(10, 2, features, labels).unwrap()
    }

    fn targets(a: f64) -> NoncoverageTargets {
        NoncoverageTargets::new(a, a).unwrap()
    }

    #[test]
    fn weight_formula_examples() {
        // well-covered point: hinge at or below one
        assert_eq!(weight_from_margin(1.0, 0.0), 1.0);
        // eps = 0, y f = -2: loss 3 -> weight 1/3
        assert!((weight_from_margin(-2.0, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        // boundary of the max: loss exactly 1
        assert_eq!(weight_from_margin(-0.5, 0.5), 1.0);
    }

    #[test]
    fn compute_weights_lie_in_unit_interval() {
        let data = small_dataset();
        let config = TrainConfig::new(1.0, targets(0.3), KernelSpec::Linear);
        let (model, _) = fit_csvm(&data, &config).unwrap();
        let weights = compute_weights(&model, &data).unwrap();
        assert!(weights.iter().all(|&w| w > 0.0 && w <= 1.0));
    }

    #[test]
    fn non_adaptive_equals_manual_single_pass() {
        let data = small_dataset();
        let mut config = TrainConfig::new(0.7, targets(0.25), KernelSpec::Linear);
        config.adaptive = false;
        let (model, trace) = fit_csvm(&data, &config).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        assert!(model.weights_final.iter().all(|&w| w == 1.0));

        // manual pipeline with unit weights
        let gram = gram_matrix(&config.kernel, &data).unwrap();
        let w = vec![1.0; data.n()];
        let problem = assemble_dual(&gram, data.labels(), &w, config.lambda, &config.targets).unwrap();
        let solution = solve_qp(&problem, config.qp_tol).unwrap();
        let c = recover_coefficients(&solution, data.labels()).unwrap();
        let h = kernel_part(&gram, &c);
        let fit = solve_intercept_margin(&h, data.labels(), &w, config.lambda, &config.targets)
            .unwrap();
        for (a, b) in model.coefficients.iter().zip(&c) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((model.intercept - fit.intercept).abs() < 1e-9);
        assert!((model.margin - fit.margin).abs() < 1e-9);
    }

    #[test]
    fn weighted_constraints_hold_at_returned_model() {
        let data = datagen::gen_example1(200, 10, 42).unwrap();
        let config = TrainConfig::new(1.0, targets(0.05), KernelSpec::Linear);
        let (model, trace) = fit_csvm(&data, &config).unwrap();
        assert!(!trace.iterations.is_empty());

        // recompute the weighted constraint loads post hoc from the model
        let mut load = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for i in 0..data.n() {
            let f = inference::score(&model, data.row(i)).unwrap();
            let eta = (1.0 - model.margin - f64::from(data.label(i)) * f).max(0.0);
            let side = usize::from(data.label(i) == 1);
            load[side] += model.weights_final[i] * eta;
            counts[side] += 1;
        }
        assert!(load[0] / counts[0] as f64 <= 0.05 + 1e-6);
        assert!(load[1] / counts[1] as f64 <= 0.05 + 1e-6);
    }

    #[test]
    fn duplicated_rows_with_halved_lambda_reproduce_the_fit() {
        let data = small_dataset();
        let mut doubled_features = Vec::new();
        let mut doubled_labels = Vec::new();
        for i in 0..data.n() {
            for _ in 0..2 {
                doubled_features.extend_from_slice(data.row(i));
                doubled_labels.push(data.label(i));
            }
        }
        let doubled = Dataset::new(2 * data.n(), 2, doubled_features, doubled_labels).unwrap();

        let mut config = TrainConfig::new(0.8, targets(0.25), KernelSpec::Linear);
        config.adaptive = false;
        let (base, _) = fit_csvm(&data, &config).unwrap();
        let mut halved = config.clone();
        halved.lambda = 0.4;
        let (doubled_model, _) = fit_csvm(&doubled, &halved).unwrap();

        assert!((base.intercept - doubled_model.intercept).abs() < 1e-6);
        assert!((base.margin - doubled_model.margin).abs() < 1e-6);
    }

    #[test]
    fn row_permutation_leaves_scores_unchanged() {
        let data = small_dataset();
        let perm: Vec<usize> = vec![7, 2, 9, 0, 5, 1, 8, 3, 6, 4];
        let shuffled = data.subset(&perm).unwrap();

        let config = TrainConfig::new(1.0, targets(0.3), KernelSpec::gaussian(1.5).unwrap());
        let (a, _) = fit_csvm(&data, &config).unwrap();
        let (b, _) = fit_csvm(&shuffled, &config).unwrap();

        let probes: Vec<[f64; 2]> = (0..10)
            .map(|i| [-1.5 + 0.3 * i as f64, 0.2 * i as f64 - 0.9])
            .collect();
        for probe in &probes {
            let fa = inference::score(&a, probe).unwrap();
            let fb = inference::score(&b, probe).unwrap();
            assert!((fa - fb).abs() < 1e-6, "{fa} vs {fb}");
        }
    }

    #[test]
    fn vacuous_targets_zero_out_theta() {
        // alpha = 1 leaves the coverage constraints slack on reasonable
        // data, so complementary slackness forces both theta variables
        // to vanish.
        let data = small_dataset();
        let gram = gram_matrix(&KernelSpec::Linear, &data).unwrap();
        let w = vec![1.0; data.n()];
        let t = targets(1.0);
        let problem = assemble_dual(&gram, data.labels(), &w, 1.0, &t).unwrap();
        let solution = solve_qp(&problem, 1e-8).unwrap();
        assert_eq!(solution.status, QpStatus::Optimal);
        let layout = VariableLayout { n_points: data.n() };
        let scale = 1.0 + data.n() as f64;
        assert!(solution.z[layout.theta(-1)] <= 1e-6 * scale);
        assert!(solution.z[layout.theta(1)] <= 1e-6 * scale);
    }

    #[test]
    fn single_class_data_is_rejected() {
        let data = Dataset::new(3, 1, vec![0.0, 1.0, 2.0], vec![1, 1, 1]).unwrap();
        let config = TrainConfig::new(1.0, targets(0.5), KernelSpec::Linear);
        assert!(fit_csvm(&data, &config).is_err());
    }
}
