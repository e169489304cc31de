//! Benchmark harness: repeated draws of a scenario, every method fitted
//! on the training split, calibrated on the tuning split, and evaluated
//! on the test split. Repeats run concurrently up to a job limit;
//! per-repeat seeds derive from the base seed and the repeat index, and
//! aggregation walks rows in repeat order, so reports are byte-identical
//! for any job count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_knn, fit_ridge_logistic};
use crate::datagen::{derive_seed, generate_scenario, Scenario};
use crate::error::{Error, Result};
use crate::inference::{evaluate, predict_batch, robust_thresholds, EvalReport, Scorer};
use crate::kernel::KernelSpec;
use crate::oracle::BayesSpec;
use crate::trainer::{fit_csvm, TrainConfig};
use crate::types::{Dataset, NoncoverageTargets};

/// A method entry in a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodSpec {
    Csvm {
        kernel: KernelSpec,
        lambda: f64,
        adaptive: bool,
    },
    Ridge {
        lambda: f64,
    },
    Knn {
        k: usize,
    },
    /// The scenario's calibrated Bayes rule, thresholds estimated once
    /// by Monte Carlo.
    Oracle {
        mc_samples: usize,
    },
}

impl MethodSpec {
    /// Stable identifier used in report rows.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Csvm {
                kernel,
                lambda,
                adaptive,
            } => {
                let tag = if *adaptive { "csvm" } else { "csvm-plain" };
                format!("{tag}[{kernel},lambda={lambda}]")
            }
            MethodSpec::Ridge { lambda } => format!("ridge[lambda={lambda}]"),
            MethodSpec::Knn { k } => format!("knn[k={k}]"),
            MethodSpec::Oracle { .. } => "oracle".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenario: Scenario,
    /// Total dimension; defaults to the scenario's reference dimension.
    pub dims: Option<usize>,
    pub n_train: usize,
    pub n_tune: usize,
    pub n_test: usize,
    pub targets: NoncoverageTargets,
    pub methods: Vec<MethodSpec>,
    pub repeats: usize,
    pub seed: u64,
    /// Worker count; an execution detail with no effect on results, so
    /// it is left out of serialized provenance.
    #[serde(skip, default)]
    pub jobs: usize,
}

/// One (repeat, method) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRow {
    pub repeat: usize,
    pub method: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Mean and standard error across repeats for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub n_train: usize,
    pub repeats: usize,
    pub mean_noncov_neg: Option<f64>,
    pub mean_noncov_pos: Option<f64>,
    pub mean_ambiguity: f64,
    pub stderr_noncov_neg: Option<f64>,
    pub stderr_noncov_pos: Option<f64>,
    pub stderr_ambiguity: f64,
    /// Fraction of repeats meeting both coverage targets.
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<RepeatRow>,
    pub aggregates: Vec<MethodAggregate>,
}

/// Runs the full benchmark.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    if config.n_test == 0 {
        return Err(Error::InvalidArgument(
            "the benchmark needs a test split".into(),
        ));
    }
    let dims = config.dims.unwrap_or_else(|| config.scenario.default_dims());
    if dims < 2 {
        return Err(Error::InvalidArgument(format!(
            "total dimension must be at least 2, got {dims}"
        )));
    }

    // Oracle thresholds are shared across repeats; estimate them once.
    // Index u64::MAX maps the derived seed back onto the base seed, which
    // no repeat index can produce, so the oracle's Monte-Carlo stream
    // never collides with a repeat's data streams.
    let oracle = config
        .methods
        .iter()
        .find_map(|m| match m {
            MethodSpec::Oracle { mc_samples } => Some(*mc_samples),
            _ => None,
        })
        .map(|mc_samples| {
            BayesSpec::new(
                config.scenario,
                dims - 2,
                mc_samples,
                derive_seed(config.seed, u64::MAX),
            )
            .calibrated(&config.targets)
        })
        .transpose()?;

    let jobs = config.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Numerical(format!("could not build thread pool: {e}")))?;

    let per_repeat: Vec<Result<Vec<RepeatRow>>> = pool.install(|| {
        (0..config.repeats)
            .into_par_iter()
            .map(|repeat| run_repeat(config, dims, oracle.as_ref(), repeat))
            .collect()
    });

    let mut rows = Vec::new();
    for outcome in per_repeat {
        rows.extend(outcome?);
    }

    let aggregates = aggregate(config, &rows);
    Ok(BenchmarkReport { rows, aggregates })
}

fn run_repeat(
    config: &BenchmarkConfig,
    dims: usize,
    oracle: Option<&BayesSpec>,
    repeat: usize,
) -> Result<Vec<RepeatRow>> {
    let base = derive_seed(config.seed, 3 * repeat as u64);
    let train = generate_scenario(config.scenario, config.n_train, dims, base)?;
    let tune = generate_scenario(
        config.scenario,
        config.n_tune,
        dims,
        derive_seed(config.seed, 3 * repeat as u64 + 1),
    )?;
    let test = generate_scenario(
        config.scenario,
        config.n_test,
        dims,
        derive_seed(config.seed, 3 * repeat as u64 + 2),
    )?;

    let mut rows = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let report = match method {
            MethodSpec::Csvm {
                kernel,
                lambda,
                adaptive,
            } => {
                let mut train_config = TrainConfig::new(*lambda, config.targets, *kernel);
                train_config.adaptive = *adaptive;
                train_config.seed = base;
                let (model, _) = fit_csvm(&train, &train_config)?;
                scored_report(&model, &tune, &test, &config.targets)?
            }
            MethodSpec::Ridge { lambda } => {
                let model = fit_ridge_logistic(&train, *lambda, 200, 1e-8)?;
                scored_report(&model, &tune, &test, &config.targets)?
            }
            MethodSpec::Knn { k } => {
                let model = fit_knn(&train, *k)?;
                scored_report(&model, &tune, &test, &config.targets)?
            }
            MethodSpec::Oracle { .. } => {
                let spec = oracle.expect("oracle spec prepared before the run");
                let mut predictions = Vec::with_capacity(test.n());
                for i in 0..test.n() {
                    predictions.push(crate::oracle::bayes_predict(spec, test.row(i))?);
                }
                evaluate(&predictions, test.labels(), &config.targets)?
            }
        };
        rows.push(RepeatRow {
            repeat,
            method: method.label(),
            report,
        });
    }
    Ok(rows)
}

/// Calibrate on the tuning split, evaluate on the test split.
fn scored_report<S: Scorer>(
    model: &S,
    tune: &Dataset,
    test: &Dataset,
    targets: &NoncoverageTargets,
) -> Result<EvalReport> {
    let tune_scores = model.score_batch(tune)?;
    let thresholds = robust_thresholds(&tune_scores, tune.labels(), targets)?;
    let test_scores = model.score_batch(test)?;
    let predictions = predict_batch(&test_scores, &thresholds);
    evaluate(&predictions, test.labels(), targets)
}

fn aggregate(config: &BenchmarkConfig, rows: &[RepeatRow]) -> Vec<MethodAggregate> {
    config
        .methods
        .iter()
        .map(|method| {
            let label = method.label();
            let reports: Vec<&EvalReport> = rows
                .iter()
                .filter(|r| r.method == label)
                .map(|r| &r.report)
                .collect();
            let neg: Vec<f64> = reports.iter().filter_map(|r| r.noncoverage_neg).collect();
            let pos: Vec<f64> = reports.iter().filter_map(|r| r.noncoverage_pos).collect();
            let amb: Vec<f64> = reports.iter().map(|r| r.ambiguity).collect();
            let successes = reports.iter().filter(|r| r.success).count();
            let (amb_mean, amb_se) = mean_stderr(&amb).expect("ambiguity is always defined");
            let neg_stats = mean_stderr(&neg);
            let pos_stats = mean_stderr(&pos);
            MethodAggregate {
                method: label,
                n_train: config.n_train,
                repeats: reports.len(),
                mean_noncov_neg: neg_stats.map(|s| s.0),
                mean_noncov_pos: pos_stats.map(|s| s.0),
                mean_ambiguity: amb_mean,
                stderr_noncov_neg: neg_stats.map(|s| s.1),
                stderr_noncov_pos: pos_stats.map(|s| s.1),
                stderr_ambiguity: amb_se,
                success_rate: successes as f64 / reports.len().max(1) as f64,
            }
        })
        .collect()
}

fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(jobs: usize) -> BenchmarkConfig {
        BenchmarkConfig {
            scenario: Scenario::Example1,
            dims: Some(4),
            n_train: 40,
            n_tune: 40,
            n_test: 300,
            targets: NoncoverageTargets::new(0.2, 0.2).unwrap(),
            methods: vec![
                MethodSpec::Csvm {
                    kernel: KernelSpec::Linear,
                    lambda: 1.0,
                    adaptive: false,
                },
                MethodSpec::Ridge { lambda: 0.01 },
            ],
            repeats: 3,
            seed: 1234,
            jobs,
        }
    }

    #[test]
    fn single_repeat_equals_train_plus_evaluate() {
        let mut config = tiny_config(1);
        config.repeats = 1;
        config.methods = vec![MethodSpec::Ridge { lambda: 0.01 }];
        let report = run_benchmark(&config).unwrap();
        assert_eq!(report.rows.len(), 1);

        // compose the pipeline by hand with the same derived seeds
        let train = generate_scenario(config.scenario, 40, 4, derive_seed(1234, 0)).unwrap();
        let tune = generate_scenario(config.scenario, 40, 4, derive_seed(1234, 1)).unwrap();
        let test = generate_scenario(config.scenario, 300, 4, derive_seed(1234, 2)).unwrap();
        let model = fit_ridge_logistic(&train, 0.01, 200, 1e-8).unwrap();
        let expected = scored_report(&model, &tune, &test, &config.targets).unwrap();
        assert_eq!(report.rows[0].report, expected);

        // the aggregate of one repeat is that repeat
        assert_eq!(report.aggregates[0].mean_ambiguity, expected.ambiguity);
        assert_eq!(report.aggregates[0].stderr_ambiguity, 0.0);
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let config = tiny_config(2);
        let report = run_benchmark(&config).unwrap();
        for agg in &report.aggregates {
            let ambs: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.method == agg.method)
                .map(|r| r.report.ambiguity)
                .collect();
            let mean = ambs.iter().sum::<f64>() / ambs.len() as f64;
            assert_eq!(agg.mean_ambiguity, mean);
            assert_eq!(agg.repeats, ambs.len());
        }
    }

    #[test]
    fn job_count_does_not_change_results() {
        let a = run_benchmark(&tiny_config(1)).unwrap();
        let b = run_benchmark(&tiny_config(4)).unwrap();
        assert_eq!(a, b);
    }
}
