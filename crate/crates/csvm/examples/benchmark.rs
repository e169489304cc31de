//! A miniature benchmark run: repeated scenario draws, several methods,
//! per-repeat rows plus mean ± standard error aggregates, written in the
//! same formats the `csvm benchmark` subcommand emits.
//!
//! ```bash
//! cargo run --example benchmark
//! ```

use csvm::bench::{run_benchmark, BenchmarkConfig, MethodSpec};
use csvm::datagen::Scenario;
use csvm::io::{write_jsonl, write_plot_csv, RunMeta};
use csvm::types::NoncoverageTargets;
use csvm::KernelSpec;

fn main() -> csvm::Result<()> {
    let config = BenchmarkConfig {
        scenario: Scenario::Example1,
        dims: Some(6),
        n_train: 100,
        n_tune: 100,
        n_test: 2000,
        targets: NoncoverageTargets::new(0.05, 0.05)?,
        methods: vec![
            MethodSpec::Csvm {
                kernel: KernelSpec::Linear,
                lambda: 0.01,
                adaptive: true,
            },
            MethodSpec::Ridge { lambda: 0.01 },
            MethodSpec::Knn { k: 9 },
            MethodSpec::Oracle { mc_samples: 200_000 },
        ],
        repeats: 5,
        seed: 2468,
        jobs: 2,
    };

    let report = run_benchmark(&config)?;
    println!("method                                noncov(-1) noncov(+1) ambiguity  (±se)");
    for agg in &report.aggregates {
        println!(
            "{:<38} {:>9.4} {:>9.4} {:>9.4}  ±{:.4}",
            agg.method,
            agg.mean_noncov_neg.unwrap(),
            agg.mean_noncov_pos.unwrap(),
            agg.mean_ambiguity,
            agg.stderr_ambiguity
        );
    }

    let out = std::env::temp_dir().join("csvm-benchmark-demo");
    std::fs::create_dir_all(&out)?;
    let meta = RunMeta::new(config.seed, serde_json::to_value(&config)?);
    write_jsonl(&out.join("rows.jsonl"), &meta, &report.rows)?;
    write_plot_csv(&out.join("aggregate.csv"), &meta, &report.aggregates)?;
    println!("reports written under {}", out.display());
    Ok(())
}
