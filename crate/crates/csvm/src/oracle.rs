//! Bayes-rule oracles for the synthetic scenarios and calculators for
//! the finite-sample constants and bounds.
//!
//! The oracles expose the conditional class probability `eta(x)` of each
//! scenario, Monte-Carlo class-conditional thresholds on the `eta`
//! scale, and the induced optimal set-valued rule. They serve as the
//! reference every trained method is measured against.
//!
//! Scenario 2's printed density ratio is degenerate (the two class
//! "densities" sum to zero), so this crate uses the logistic repair
//! `eta(x) = 1 / (1 + exp(-g(x)))` with
//! `g(x) = -3.6 x1^2 + 7.2 x2^2 - 0.8`, which keeps the intended quartic
//! decision boundary `{g = 0}` while making the labels well defined.

use rayon::prelude::*;

use crate::datagen::{sample_pair, stream_rng, Scenario};
use crate::error::{Error, Result};
use crate::inference::{predict_with_thresholds, robust_thresholds, EvalReport, Thresholds};
use crate::types::{NoncoverageTargets, SetLabel, TheoryParams};

/// Monte-Carlo work is sharded in fixed-size chunks with per-chunk
/// sub-streams, so results do not depend on the worker count.
const MC_CHUNK: usize = 1 << 15;

/// A scenario oracle: which law, how many appended noise dimensions,
/// and the Monte-Carlo budget for threshold estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesSpec {
    pub scenario: Scenario,
    pub noise_dims: usize,
    pub mc_samples: usize,
    pub seed: u64,
    thresholds: Option<Thresholds>,
}

impl BayesSpec {
    pub fn new(scenario: Scenario, noise_dims: usize, mc_samples: usize, seed: u64) -> Self {
        BayesSpec {
            scenario,
            noise_dims,
            mc_samples,
            seed,
            thresholds: None,
        }
    }

    /// Fills the decision thresholds; both must lie on the `eta` scale.
    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Result<Self> {
        for t in [thresholds.t_neg, thresholds.t_pos] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!(
                    "oracle thresholds live on the probability scale, got {t}"
                )));
            }
        }
        self.thresholds = Some(thresholds);
        Ok(self)
    }

    pub fn thresholds(&self) -> Option<Thresholds> {
        self.thresholds
    }

    /// Estimates thresholds and returns the calibrated spec.
    pub fn calibrated(self, targets: &NoncoverageTargets) -> Result<Self> {
        let thresholds = bayes_thresholds(&self, targets)?;
        self.with_thresholds(thresholds)
    }
}

/// The conditional class probability `P(Y = +1 | X = x)` of a scenario,
/// evaluated on the two signal coordinates. Noise dimensions are
/// identically distributed in both classes and cancel, so any trailing
/// coordinates are ignored.
pub fn eta(spec: &BayesSpec, x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "eta requires at least the two signal coordinates, got {}",
            x.len()
        )));
    }
    Ok(eta_signal(spec.scenario, x[0], x[1]))
}

pub(crate) fn eta_signal(scenario: Scenario, x1: f64, x2: f64) -> f64 {
    match scenario {
        Scenario::Example1 => {
            // log-space density ratio of the two class Gaussians
            let log_neg = gaussian_log_density(x1, -2.0, 2.0) + gaussian_log_density(x2, 1.0, 0.5);
            let log_pos = gaussian_log_density(x1, 1.0, 0.5) + gaussian_log_density(x2, 0.0, 2.0);
            1.0 / (1.0 + (log_neg - log_pos).exp())
        }
        Scenario::Example2 => {
            let g = -3.6 * x1 * x1 + 7.2 * x2 * x2 - 0.8;
            1.0 / (1.0 + (-g).exp())
        }
        Scenario::Example3 => radial_eta(x1.hypot(x2), (0.0, 1.2), (0.8, 2.0)),
    }
}

fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / variance - 0.5 * variance.ln()
}

/// `eta` for a pair of uniform-radius classes with equal angular law.
/// The 1/r area factor is common to both classes and cancels; outside
/// both supports the nearer class wins, and `r = 0` sits inside the
/// inner class only.
pub(crate) fn radial_eta(r: f64, neg: (f64, f64), pos: (f64, f64)) -> f64 {
    let in_neg = r >= neg.0 && r <= neg.1;
    let in_pos = r >= pos.0 && r <= pos.1;
    let w_neg = 1.0 / (neg.1 - neg.0);
    let w_pos = 1.0 / (pos.1 - pos.0);
    match (in_neg, in_pos) {
        (true, true) => w_pos / (w_pos + w_neg),
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => {
            // outside both supports: attribute to the closer one
            let d_neg = (r - neg.1).abs().min((r - neg.0).abs());
            let d_pos = (r - pos.1).abs().min((r - pos.0).abs());
            if d_pos <= d_neg {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Monte-Carlo estimates of the class-conditional `eta` quantiles that
/// meet the coverage targets, deterministic given the spec's seed.
pub fn bayes_thresholds(spec: &BayesSpec, targets: &NoncoverageTargets) -> Result<Thresholds> {
    if spec.mc_samples == 0 {
        return Err(Error::InvalidArgument(
            "threshold estimation needs at least one Monte-Carlo sample".into(),
        ));
    }
    let chunks = chunk_sizes(spec.mc_samples);
    let draws: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .enumerate()
        .map(|(ci, &take)| {
            let mut rng = stream_rng(spec.seed, 1 + ci as u64);
            let mut neg = Vec::new();
            let mut pos = Vec::new();
            for _ in 0..take {
                let (sig, label) = sample_pair(spec.scenario, &mut rng);
                let e = eta_signal(spec.scenario, sig[0], sig[1]);
                if label == 1 {
                    pos.push(e);
                } else {
                    neg.push(e);
                }
            }
            (neg, pos)
        })
        .collect();

    let mut scores = Vec::with_capacity(spec.mc_samples);
    let mut labels = Vec::with_capacity(spec.mc_samples);
    for (neg, pos) in draws {
        for e in neg {
            scores.push(e);
            labels.push(-1i8);
        }
        for e in pos {
            scores.push(e);
            labels.push(1i8);
        }
    }
    robust_thresholds(&scores, &labels, targets)
}

/// The oracle's set-valued decision at `x`; requires filled thresholds.
pub fn bayes_predict(spec: &BayesSpec, x: &[f64]) -> Result<SetLabel> {
    let thresholds = spec.thresholds.ok_or_else(|| {
        Error::InvalidArgument(
            "oracle thresholds not filled; call bayes_thresholds or calibrated() first".into(),
        )
    })?;
    Ok(predict_with_thresholds(eta(spec, x)?, &thresholds))
}

/// Fresh-draw Monte-Carlo evaluation of the calibrated oracle rule:
/// class-conditional non-coverage and ambiguity, merged across chunks by
/// count-weighted sums.
pub fn mc_evaluate(
    spec: &BayesSpec,
    targets: &NoncoverageTargets,
    samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    let thresholds = spec.thresholds.ok_or_else(|| {
        Error::InvalidArgument("oracle thresholds not filled".into())
    })?;
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "evaluation needs at least one sample".into(),
        ));
    }
    let chunks = chunk_sizes(samples);
    let tallies: Vec<[usize; 5]> = chunks
        .par_iter()
        .enumerate()
        .map(|(ci, &take)| {
            let mut rng = stream_rng(seed, 1 + ci as u64);
            // [n_neg, n_pos, miss_neg, miss_pos, both]
            let mut t = [0usize; 5];
            for _ in 0..take {
                let (sig, label) = sample_pair(spec.scenario, &mut rng);
                let e = eta_signal(spec.scenario, sig[0], sig[1]);
                let pred = predict_with_thresholds(e, &thresholds);
                let side = usize::from(label == 1);
                t[side] += 1;
                if !pred.covers(label) {
                    t[2 + side] += 1;
                }
                if pred == SetLabel::Both {
                    t[4] += 1;
                }
            }
            t
        })
        .collect();
    let mut total = [0usize; 5];
    for t in tallies {
        for (acc, v) in total.iter_mut().zip(t) {
            *acc += v;
        }
    }
    let rate = |miss: usize, count: usize| (count > 0).then(|| miss as f64 / count as f64);
    let noncoverage_neg = rate(total[2], total[0]);
    let noncoverage_pos = rate(total[3], total[1]);
    let success = match (noncoverage_neg, noncoverage_pos) {
        (Some(n), Some(p)) => n <= targets.alpha_neg() && p <= targets.alpha_pos(),
        _ => false,
    };
    Ok(EvalReport {
        noncoverage_neg,
        noncoverage_pos,
        ambiguity: total[4] as f64 / samples as f64,
        n_test: samples,
        success,
    })
}

fn chunk_sizes(total: usize) -> Vec<usize> {
    let mut sizes = vec![MC_CHUNK; total / MC_CHUNK];
    if total % MC_CHUNK != 0 {
        sizes.push(total % MC_CHUNK);
    }
    sizes
}

/// Half-width of the ±3-sigma binomial band around a Monte-Carlo rate;
/// the error bar quoted next to every MC estimate.
pub fn three_sigma_band(rate: f64, samples: usize) -> f64 {
    let p = rate.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / samples.max(1) as f64).sqrt()
}

/// Finite-sample non-coverage bound: the empirical weighted constraint
/// value plus the concentration slack
/// `3 sqrt(2 s r log(1/zeta) / n_j) + sqrt(s r / n_j)`.
pub fn noncoverage_bound(theory: &TheoryParams, n_j: usize, empirical: f64) -> Result<f64> {
    if n_j == 0 {
        return Err(Error::InvalidArgument(
            "the bound needs at least one observation in the class".into(),
        ));
    }
    let sr = theory.norm_bound * theory.kernel_sup;
    let n = n_j as f64;
    let log_term = (1.0 / theory.confidence).ln();
    Ok(empirical + 3.0 * (2.0 * sr * log_term / n).sqrt() + (sr / n).sqrt())
}

/// The two constants of the finite-sample analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// Factor transferring excess surrogate risk to excess ambiguity:
    /// `1/(4c^2) + 1/(2c)` for margin gap `c`.
    pub ambiguity_transfer: f64,
    /// Scale of the per-class target tightening `kappa / sqrt(n_j)`:
    /// `(6 log(1/zeta) + 1) sqrt(s r)`.
    pub alpha_tightening: f64,
}

pub fn theory_constants(theory: &TheoryParams) -> TheoryConstants {
    let c = theory.margin_gap;
    let sr = (theory.norm_bound * theory.kernel_sup).sqrt();
    TheoryConstants {
        ambiguity_transfer: 1.0 / (4.0 * c * c) + 1.0 / (2.0 * c),
        alpha_tightening: (6.0 * (1.0 / theory.confidence).ln() + 1.0) * sr,
    }
}
