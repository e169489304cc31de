//! Command-line surface: dataset simulation, training, evaluation,
//! hyperparameter tuning, and the benchmark harness. Every subcommand is
//! a thin wrapper over the library; all of them emit files carrying the
//! provenance needed to reproduce the run.
//!
//! Error classes map to distinct exit codes (see [`exit_code`]) so batch
//! drivers can tell schema problems from infeasible targets.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::bench::{run_benchmark, BenchmarkConfig, MethodSpec};
use crate::datagen::{derive_seed, generate_scenario, Scenario};
use crate::error::{Error, Result};
use crate::inference::{evaluate, predict_batch, robust_thresholds, Scorer, Thresholds};
use crate::io::{
    parse_kernel, read_dataset, read_model, write_dataset, write_jsonl, write_model,
    write_plot_csv, RunMeta,
};
use crate::oracle::BayesSpec;
use crate::trainer::{fit_csvm, TrainConfig};
use crate::tuning::{
    gaussian_rho_grid, grid_search, polynomial_degree_grid, SearchMethod,
};
use crate::types::NoncoverageTargets;
use crate::KernelSpec;

#[derive(Parser, Debug)]
#[command(
    name = "csvm",
    version,
    about = "Confidence-set SVM: set-valued classification with coverage control"
)]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate train/tune/test CSVs for a synthetic scenario.
    Simulate(SimulateArgs),
    /// Train a model on a dataset CSV and write a model file.
    Train(TrainArgs),
    /// Evaluate a model file or the scenario oracle on a dataset CSV.
    Evaluate(EvaluateArgs),
    /// Two-step hyperparameter search on a train/tune pair.
    Tune(TuneArgs),
    /// Repeated simulate-train-evaluate runs with aggregate statistics.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario name: example1, example2, or example3.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 400)]
    pub n_train: usize,
    #[arg(long, default_value_t = 400)]
    pub n_tune: usize,
    /// Set to 0 to skip the test split.
    #[arg(long, default_value_t = 20000)]
    pub n_test: usize,
    /// Total dimension; defaults to the scenario's reference dimension.
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_neg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_pos: f64,
    /// Slack price in the scaled objective.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// linear, gaussian:<rho>, or poly:<degree>.
    #[arg(long, default_value = "linear")]
    pub kernel: String,
    /// Adaptive constraint reweighting (true) or a single pass (false).
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub adaptive: bool,
    #[arg(long, default_value_t = 5)]
    pub max_outer_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub qp_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model file.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model file produced by `train`. Mutually exclusive with --oracle.
    #[arg(long, conflicts_with = "oracle")]
    pub model: Option<PathBuf>,
    /// Evaluate a scenario's Bayes oracle instead of a trained model.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Dataset CSV to evaluate on.
    #[arg(long)]
    pub data: PathBuf,
    /// Tuning CSV for robust threshold calibration; without it a model
    /// predicts through its solved margin band.
    #[arg(long)]
    pub tune: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_neg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_pos: f64,
    /// Monte-Carlo budget for oracle threshold estimation.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSONL report destination.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub tune: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_neg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_pos: f64,
    /// csvm, ridge, or knn.
    #[arg(long, default_value = "csvm")]
    pub method: String,
    /// Comma-separated kernels; `gaussian-grid` and `poly-grid` expand
    /// to the reference grids.
    #[arg(long, default_value = "linear")]
    pub kernels: String,
    /// Comma-separated k values for the knn method.
    #[arg(long, default_value = "1,3,5,9,15,25")]
    pub k_grid: String,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub adaptive: bool,
    /// Optional JSONL destination for the full search trace.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 400)]
    pub n_train: usize,
    #[arg(long, default_value_t = 400)]
    pub n_tune: usize,
    #[arg(long, default_value_t = 20000)]
    pub n_test: usize,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concurrent repeats; defaults to $CSVM_JOBS or 1.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Repeatable method spec: csvm/<kernel>/<lambda>[/plain],
    /// ridge/<lambda>, knn/<k>, oracle[/<mc_samples>].
    #[arg(long = "method", action = ArgAction::Append, required = true)]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_neg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_pos: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Maps error classes to stable process exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::Schema(_) | Error::Csv(_) => 3,
        Error::MissingColumns(_) => 4,
        Error::Mismatch(_) => 5,
        Error::Infeasible(_) | Error::Training(_) => 6,
        Error::Numerical(_) => 7,
        Error::Io(_) | Error::Json(_) => 8,
    }
}

/// Default worker count: `$CSVM_JOBS` when set, otherwise 1.
pub fn default_jobs() -> usize {
    std::env::var("CSVM_JOBS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => run_simulate(&args),
        Command::Train(args) => run_train(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Tune(args) => run_tune(&args),
        Command::Benchmark(args) => run_benchmark_cmd(&args),
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = Scenario::parse(&args.scenario)?;
    let dims = args.dims.unwrap_or_else(|| scenario.default_dims());
    let config = serde_json::json!({
        "command": "simulate",
        "scenario": scenario,
        "n_train": args.n_train,
        "n_tune": args.n_tune,
        "n_test": args.n_test,
        "dims": dims,
        "seed": args.seed,
    });
    let meta = RunMeta::new(args.seed, config);

    std::fs::create_dir_all(&args.out_dir)?;
    let splits: [(&str, usize, u64); 3] = [
        ("train", args.n_train, 0),
        ("tune", args.n_tune, 1),
        ("test", args.n_test, 2),
    ];
    let mut written = Vec::new();
    for (name, size, stream) in splits {
        if size == 0 {
            continue;
        }
        let data = generate_scenario(scenario, size, dims, derive_seed(args.seed, stream))?;
        let path = args.out_dir.join(format!("{scenario}_{name}.csv"));
        write_dataset(&path, &data, &meta)?;
        written.push(path.display().to_string());
    }
    println!(
        "{}",
        serde_json::to_string(&serde_json::json!({
            "record": "simulate",
            "meta": meta,
            "files": written,
        }))?
    );
    Ok(())
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let data = read_dataset(&args.train)?;
    let targets = NoncoverageTargets::new(args.alpha_neg, args.alpha_pos)?;
    let kernel = parse_kernel(&args.kernel)?;
    let mut config = TrainConfig::new(args.lambda, targets, kernel);
    config.adaptive = args.adaptive;
    config.max_outer_iters = args.max_outer_iters;
    config.qp_tol = args.qp_tol;
    config.seed = args.seed;

    let (model, trace) = fit_csvm(&data, &config)?;
    let meta = RunMeta::new(
        args.seed,
        serde_json::json!({
            "command": "train",
            "train": args.train.display().to_string(),
            "alpha_neg": args.alpha_neg,
            "alpha_pos": args.alpha_pos,
            "lambda": args.lambda,
            "kernel": kernel,
            "adaptive": args.adaptive,
            "max_outer_iters": args.max_outer_iters,
            "qp_tol": args.qp_tol,
        }),
    );
    write_model(&args.output, &model, &meta)?;
    println!(
        "{}",
        serde_json::to_string(&serde_json::json!({
            "record": "train",
            "model": args.output.display().to_string(),
            "margin": model.margin,
            "intercept": model.intercept,
            "outer_iterations": trace.iterations.len(),
            "converged_by_weights": trace.converged_by_weights,
            "fallback_to_previous": trace.fallback_to_previous,
        }))?
    );
    Ok(())
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let data = read_dataset(&args.data)?;
    let targets = NoncoverageTargets::new(args.alpha_neg, args.alpha_pos)?;

    let (label, thresholds, predictions) = match (&args.model, &args.oracle) {
        (Some(model_path), None) => {
            let (model, _) = read_model(model_path)?;
            let thresholds = match &args.tune {
                Some(tune_path) => {
                    let tune = read_dataset(tune_path)?;
                    let scores = model.score_batch(&tune)?;
                    robust_thresholds(&scores, tune.labels(), &targets)?
                }
                None => Thresholds {
                    t_neg: model.margin,
                    t_pos: -model.margin,
                },
            };
            let scores = model.score_batch(&data)?;
            (
                format!("model:{}", model_path.display()),
                thresholds,
                predict_batch(&scores, &thresholds),
            )
        }
        (None, Some(scenario_name)) => {
            let scenario = Scenario::parse(scenario_name)?;
            let spec = BayesSpec::new(
                scenario,
                data.dim().saturating_sub(2),
                args.mc_samples,
                args.seed,
            )
            .calibrated(&targets)?;
            let thresholds = spec.thresholds().expect("calibrated() filled thresholds");
            let mut predictions = Vec::with_capacity(data.n());
            for i in 0..data.n() {
                predictions.push(crate::oracle::bayes_predict(&spec, data.row(i))?);
            }
            (format!("oracle:{scenario}"), thresholds, predictions)
        }
        _ => {
            return Err(Error::InvalidArgument(
                "pass exactly one of --model or --oracle".into(),
            ))
        }
    };

    let report = evaluate(&predictions, data.labels(), &targets)?;
    let meta = RunMeta::new(
        args.seed,
        serde_json::json!({
            "command": "evaluate",
            "source": label,
            "data": args.data.display().to_string(),
            "tune": args.tune.as_ref().map(|p| p.display().to_string()),
            "alpha_neg": args.alpha_neg,
            "alpha_pos": args.alpha_pos,
        }),
    );
    let record = serde_json::json!({
        "record": "evaluate",
        "source": label,
        "thresholds": thresholds,
        "report": report,
    });
    if let Some(path) = &args.output {
        write_jsonl(path, &meta, &[record.clone()])?;
    }
    println!("{}", serde_json::to_string(&record)?);
    Ok(())
}

pub fn run_tune(args: &TuneArgs) -> Result<()> {
    let train = read_dataset(&args.train)?;
    let tune = read_dataset(&args.tune)?;
    let targets = NoncoverageTargets::new(args.alpha_neg, args.alpha_pos)?;

    let method = match args.method.as_str() {
        "csvm" => SearchMethod::Csvm {
            adaptive: args.adaptive,
        },
        "ridge" => SearchMethod::RidgeLogistic,
        "knn" => SearchMethod::Knn {
            k_grid: parse_usize_list(&args.k_grid)?,
        },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown method '{other}'; expected csvm, ridge, or knn"
            )))
        }
    };
    let kernel_grid = parse_kernel_list(&args.kernels)?;
    let outcome = grid_search(&train, &tune, &targets, &kernel_grid, &method)?;

    let meta = RunMeta::new(
        0,
        serde_json::json!({
            "command": "tune",
            "train": args.train.display().to_string(),
            "tune": args.tune.display().to_string(),
            "method": args.method,
            "kernels": args.kernels,
            "alpha_neg": args.alpha_neg,
            "alpha_pos": args.alpha_pos,
        }),
    );
    if let Some(path) = &args.output {
        write_jsonl(path, &meta, &outcome.trace)?;
    }
    println!(
        "{}",
        serde_json::to_string(&serde_json::json!({
            "record": "tune",
            "best": outcome.best,
            "candidates": outcome.trace.len(),
            "failures": outcome.failures.len(),
        }))?
    );
    Ok(())
}

pub fn run_benchmark_cmd(args: &BenchmarkArgs) -> Result<()> {
    let scenario = Scenario::parse(&args.scenario)?;
    let methods = args
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<Vec<_>>>()?;
    let config = BenchmarkConfig {
        scenario,
        dims: args.dims,
        n_train: args.n_train,
        n_tune: args.n_tune,
        n_test: args.n_test,
        targets: NoncoverageTargets::new(args.alpha_neg, args.alpha_pos)?,
        methods,
        repeats: args.repeats,
        seed: args.seed,
        jobs: args.jobs.unwrap_or_else(default_jobs),
    };
    let report = run_benchmark(&config)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let meta = RunMeta::new(args.seed, serde_json::to_value(&config)?);
    let rows_path = args.out_dir.join(format!("{scenario}_benchmark.jsonl"));
    write_jsonl(&rows_path, &meta, &report.rows)?;
    let agg_path = args.out_dir.join(format!("{scenario}_aggregate.csv"));
    write_plot_csv(&agg_path, &meta, &report.aggregates)?;

    for agg in &report.aggregates {
        println!("{}", serde_json::to_string(agg)?);
    }
    Ok(())
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad integer '{t}'")))
        })
        .collect()
}

fn parse_kernel_list(text: &str) -> Result<Vec<KernelSpec>> {
    let mut kernels = Vec::new();
    for token in text.split(',') {
        match token.trim() {
            "gaussian-grid" => {
                for rho in gaussian_rho_grid() {
                    kernels.push(KernelSpec::gaussian(rho)?);
                }
            }
            "poly-grid" => {
                for degree in polynomial_degree_grid() {
                    kernels.push(KernelSpec::polynomial(degree)?);
                }
            }
            other => kernels.push(parse_kernel(other)?),
        }
    }
    Ok(kernels)
}

/// Parses one benchmark method spec, slash-separated so kernel syntax
/// can keep its colon.
pub fn parse_method(text: &str) -> Result<MethodSpec> {
    let parts: Vec<&str> = text.split('/').collect();
    match parts.as_slice() {
        ["csvm", kernel, lambda] => Ok(MethodSpec::Csvm {
            kernel: parse_kernel(kernel)?,
            lambda: parse_f64(lambda)?,
            adaptive: true,
        }),
        ["csvm", kernel, lambda, "plain"] => Ok(MethodSpec::Csvm {
            kernel: parse_kernel(kernel)?,
            lambda: parse_f64(lambda)?,
            adaptive: false,
        }),
        ["ridge", lambda] => Ok(MethodSpec::Ridge {
            lambda: parse_f64(lambda)?,
        }),
        ["knn", k] => Ok(MethodSpec::Knn {
            k: k.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad k in '{text}'")))?,
        }),
        ["oracle"] => Ok(MethodSpec::Oracle {
            mc_samples: 1_000_000,
        }),
        ["oracle", mc] => Ok(MethodSpec::Oracle {
            mc_samples: mc
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad sample count in '{text}'")))?,
        }),
        _ => Err(Error::InvalidArgument(format!(
            "cannot parse method '{text}'; see --help for the accepted forms"
        ))),
    }
}

fn parse_f64(text: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad number '{text}'")))
}
