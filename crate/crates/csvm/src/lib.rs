//! Confidence-set support vector machines.
//!
//! A set-valued binary classifier built from two parallel decision
//! boundaries: scores beyond them give a definite class, scores between
//! them return the full label set `{-1, +1}`. Training minimizes the
//! ambiguity mass subject to per-class coverage constraints, solved
//! through a convex dual quadratic program; a robust calibration step on
//! held-out data then pins the operating thresholds to exact
//! finite-sample quantiles.
//!
//! Start with the runnable examples (`cargo run --example
//! train_and_predict`, `--example robust_calibration`, ...), or with
//! [`trainer::fit_csvm`] and [`inference::robust_thresholds`] directly.
//! The `csvm` binary wraps the same entry points for batch use.

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod inference;
pub mod io;
pub mod kernel;
pub mod oracle;
pub mod qp;
pub mod recover;
pub mod trainer;
pub mod tuning;
pub mod types;

pub use error::{Error, Result};
pub use inference::{EvalReport, Scorer, Thresholds};
pub use kernel::KernelSpec;
pub use trainer::{fit_csvm, TrainConfig};
pub use types::{CsvmModel, Dataset, NoncoverageTargets, SetLabel};
