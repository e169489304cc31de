//! End-to-end flows through the CLI layer: simulate, train, evaluate,
//! and tune against real files in a temp directory.

use std::fs;

use csvm::cli::{
    run_evaluate, run_simulate, run_train, run_tune, EvaluateArgs, SimulateArgs, TrainArgs,
    TuneArgs,
};
use csvm::error::Error;
use csvm::io::{read_dataset, read_model};

fn simulate(dir: &std::path::Path, n_test: usize, seed: u64) {
    run_simulate(&SimulateArgs {
        scenario: "example1".into(),
        n_train: 60,
        n_tune: 60,
        n_test,
        dims: Some(4),
        seed,
        out_dir: dir.to_path_buf(),
    })
    .unwrap();
}

#[test]
fn simulate_writes_requested_splits_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 0, 7);
    assert!(dir.path().join("example1_train.csv").exists());
    assert!(dir.path().join("example1_tune.csv").exists());
    assert!(!dir.path().join("example1_test.csv").exists());

    let first = fs::read(dir.path().join("example1_train.csv")).unwrap();
    let again = tempfile::tempdir().unwrap();
    simulate(again.path(), 0, 7);
    let second = fs::read(again.path().join("example1_train.csv")).unwrap();
    assert_eq!(first, second);

    let other_seed = tempfile::tempdir().unwrap();
    simulate(other_seed.path(), 0, 8);
    let third = fs::read(other_seed.path().join("example1_train.csv")).unwrap();
    assert_ne!(first, third);
}

#[test]
fn train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 500, 42);
    let model_path = dir.path().join("model.txt");
    run_train(&TrainArgs {
        train: dir.path().join("example1_train.csv"),
        alpha_neg: 0.1,
        alpha_pos: 0.1,
        lambda: 0.1,
        kernel: "linear".into(),
        adaptive: true,
        max_outer_iters: 5,
        qp_tol: 1e-8,
        seed: 42,
        output: model_path.clone(),
    })
    .unwrap();

    let (model, meta) = read_model(&model_path).unwrap();
    assert_eq!(meta.seed, 42);
    assert_eq!(model.support.n(), 60);
    assert!(model.margin >= 0.0);

    // calibrated evaluation
    let report_path = dir.path().join("eval.jsonl");
    run_evaluate(&EvaluateArgs {
        model: Some(model_path.clone()),
        oracle: None,
        data: dir.path().join("example1_test.csv"),
        tune: Some(dir.path().join("example1_tune.csv")),
        alpha_neg: 0.1,
        alpha_pos: 0.1,
        mc_samples: 1000,
        seed: 0,
        output: Some(report_path.clone()),
    })
    .unwrap();
    let report = fs::read_to_string(&report_path).unwrap();
    assert_eq!(report.lines().count(), 2); // meta line + record
    assert!(report.contains("\"record\":\"evaluate\""));

    // margin-band evaluation without a tuning file also works
    run_evaluate(&EvaluateArgs {
        model: Some(model_path),
        oracle: None,
        data: dir.path().join("example1_test.csv"),
        tune: None,
        alpha_neg: 0.1,
        alpha_pos: 0.1,
        mc_samples: 1000,
        seed: 0,
        output: None,
    })
    .unwrap();
}

#[test]
fn oracle_evaluation_shares_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 400, 11);
    run_evaluate(&EvaluateArgs {
        model: None,
        oracle: Some("example1".into()),
        data: dir.path().join("example1_test.csv"),
        tune: None,
        alpha_neg: 0.1,
        alpha_pos: 0.1,
        mc_samples: 50_000,
        seed: 3,
        output: Some(dir.path().join("oracle.jsonl")),
    })
    .unwrap();
    let report = fs::read_to_string(dir.path().join("oracle.jsonl")).unwrap();
    assert!(report.contains("oracle:example1"));
}

#[test]
fn evaluate_requires_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 0, 5);
    let err = run_evaluate(&EvaluateArgs {
        model: None,
        oracle: None,
        data: dir.path().join("example1_train.csv"),
        tune: None,
        alpha_neg: 0.1,
        alpha_pos: 0.1,
        mc_samples: 1000,
        seed: 0,
        output: None,
    })
    .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn tune_emits_a_trace_and_a_winner() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 0, 99);
    let trace_path = dir.path().join("trace.jsonl");
    run_tune(&TuneArgs {
        train: dir.path().join("example1_train.csv"),
        tune: dir.path().join("example1_tune.csv"),
        alpha_neg: 0.2,
        alpha_pos: 0.2,
        method: "ridge".into(),
        kernels: "linear".into(),
        k_grid: "3,5".into(),
        adaptive: false,
        output: Some(trace_path.clone()),
    })
    .unwrap();
    let trace = fs::read_to_string(&trace_path).unwrap();
    // meta line + 25 coarse + 11 fine candidates
    assert_eq!(trace.lines().count(), 37);
}

#[test]
fn mismatched_model_and_data_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 0, 1);
    let model_path = dir.path().join("model.txt");
    run_train(&TrainArgs {
        train: dir.path().join("example1_train.csv"),
        alpha_neg: 0.2,
        alpha_pos: 0.2,
        lambda: 1.0,
        kernel: "linear".into(),
        adaptive: false,
        max_outer_iters: 5,
        qp_tol: 1e-8,
        seed: 1,
        output: model_path.clone(),
    })
    .unwrap();

    // a dataset with a different dimensionality
    let other = tempfile::tempdir().unwrap();
    run_simulate(&SimulateArgs {
        scenario: "example1".into(),
        n_train: 30,
        n_tune: 0,
        n_test: 0,
        dims: Some(6),
        seed: 2,
        out_dir: other.path().to_path_buf(),
    })
    .unwrap();

    let err = run_evaluate(&EvaluateArgs {
        model: Some(model_path),
        oracle: None,
        data: other.path().join("example1_train.csv"),
        tune: None,
        alpha_neg: 0.2,
        alpha_pos: 0.2,
        mc_samples: 1000,
        seed: 0,
        output: None,
    })
    .unwrap_err();
    assert!(matches!(err, Error::Mismatch(_)), "{err:?}");
}

#[test]
fn malformed_csv_reports_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "label,x1\n2,0.5\n").unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::Schema(_))));

    fs::write(&path, "label,y1\n1,0.5\n").unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::MissingColumns(_))));

    fs::write(&path, "label,x1\n1,abc\n").unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::Schema(_))));
}
