//! Scoring, robust quantile calibration, and evaluation metrics.
//!
//! Calibration replaces the solved `±margin` band with two class-wise
//! order statistics of held-out scores, giving an exact finite-sample
//! coverage guarantee on the tuning set itself. Any monotone score
//! source can feed this path; see [`Scorer`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::eval_unchecked;
use crate::types::{CsvmModel, Dataset, NoncoverageTargets, SetLabel};

/// Score-scale decision thresholds: scores above `t_neg` exclude class
/// −1, scores below `t_pos` exclude class +1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_neg: f64,
    pub t_pos: f64,
}

/// Per-class non-coverage and ambiguity of a batch of set-valued
/// predictions. A class absent from the batch reports `None` and fails
/// the success flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub noncoverage_neg: Option<f64>,
    pub noncoverage_pos: Option<f64>,
    pub ambiguity: f64,
    pub n_test: usize,
    pub success: bool,
}

/// Anything that maps a feature row to a real score whose level sets
/// order the two classes.
pub trait Scorer {
    fn score(&self, x: &[f64]) -> Result<f64>;

    fn score_batch(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..data.n()).map(|i| self.score(data.row(i))).collect()
    }
}

impl Scorer for CsvmModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        score(self, x)
    }
}

/// Evaluates the kernel expansion `f(x) = sum_i c_i K(x_i, x) + b`.
pub fn score(model: &CsvmModel, x: &[f64]) -> Result<f64> {
    let support = &model.support;
    if x.len() != support.dim() {
        return Err(Error::Mismatch(format!(
            "probe has dimension {}, model was trained on {}",
            x.len(),
            support.dim()
        )));
    }
    let mut acc = model.intercept;
    for i in 0..support.n() {
        let c = model.coefficients[i];
        if c != 0.0 {
            acc += c * eval_unchecked(&model.kernel, support.row(i), x);
        }
    }
    Ok(acc)
}

/// Class-conditional order-statistic thresholds on held-out scores.
///
/// `t_neg` is the `ceil((1 - alpha_neg) m_neg)`-th smallest class −1
/// score and `t_pos` the `(floor(alpha_pos m_pos) + 1)`-th smallest
/// class +1 score, clamped to the observed range. By construction the
/// tuning-set non-coverage of each class is at most its target, ties
/// and duplicates included.
pub fn robust_thresholds(
    scores: &[f64],
    labels: &[i8],
    targets: &NoncoverageTargets,
) -> Result<Thresholds> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "scores and labels must have equal lengths".into(),
        ));
    }
    let mut neg: Vec<f64> = Vec::new();
    let mut pos: Vec<f64> = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        if !s.is_finite() {
            return Err(Error::InvalidArgument("scores must be finite".into()));
        }
        if y == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration requires both classes in the tuning data".into(),
        ));
    }
    neg.sort_by(f64::total_cmp);
    pos.sort_by(f64::total_cmp);

    let t_neg = neg[upper_rank(neg.len(), targets.alpha_neg()) - 1];
    let t_pos = pos[lower_rank(pos.len(), targets.alpha_pos()) - 1];
    Ok(Thresholds { t_neg, t_pos })
}

/// 1-based rank of the upper-side threshold order statistic. The small
/// shift guards exact-integer products against float dust.
fn upper_rank(m: usize, alpha: f64) -> usize {
    let k = ((1.0 - alpha) * m as f64 - 1e-9).ceil() as isize;
    k.clamp(1, m as isize) as usize
}

/// 1-based rank of the lower-side threshold order statistic.
fn lower_rank(m: usize, alpha: f64) -> usize {
    let k = (alpha * m as f64 + 1e-9).floor() as isize + 1;
    k.clamp(1, m as isize) as usize
}

/// Set-valued decision from a calibrated score.
///
/// When the thresholds cross (`t_neg < t_pos`, possible on easy data),
/// the gap is split at its midpoint with ties going to the positive
/// class.
pub fn predict_with_thresholds(s: f64, thresholds: &Thresholds) -> SetLabel {
    let Thresholds { t_neg, t_pos } = *thresholds;
    if t_neg < t_pos && s > t_neg && s < t_pos {
        return if s >= 0.5 * (t_neg + t_pos) {
            SetLabel::PosOnly
        } else {
            SetLabel::NegOnly
        };
    }
    if s > t_neg {
        SetLabel::PosOnly
    } else if s < t_pos {
        SetLabel::NegOnly
    } else {
        SetLabel::Both
    }
}

/// Counts non-coverage per class and the ambiguity mass of a batch.
pub fn evaluate(
    predictions: &[SetLabel],
    labels: &[i8],
    targets: &NoncoverageTargets,
) -> Result<EvalReport> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "predictions and labels must have equal lengths".into(),
        ));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot evaluate an empty batch".into(),
        ));
    }
    let mut miss = [0usize; 2];
    let mut count = [0usize; 2];
    let mut both = 0usize;
    for (&pred, &y) in predictions.iter().zip(labels) {
        let side = usize::from(y == 1);
        count[side] += 1;
        if !pred.covers(y) {
            miss[side] += 1;
        }
        if pred == SetLabel::Both {
            both += 1;
        }
    }
    let rate = |side: usize| -> Option<f64> {
        (count[side] > 0).then(|| miss[side] as f64 / count[side] as f64)
    };
    let noncoverage_neg = rate(0);
    let noncoverage_pos = rate(1);
    let success = match (noncoverage_neg, noncoverage_pos) {
        (Some(n), Some(p)) => n <= targets.alpha_neg() && p <= targets.alpha_pos(),
        _ => false,
    };
    Ok(EvalReport {
        noncoverage_neg,
        noncoverage_pos,
        ambiguity: both as f64 / predictions.len() as f64,
        n_test: predictions.len(),
        success,
    })
}

/// Scores a dataset, calibrates on it, or predicts it in one call chain;
/// small conveniences used by the harness and examples.
pub fn predict_batch(scores: &[f64], thresholds: &Thresholds) -> Vec<SetLabel> {
    scores
        .iter()
        .map(|&s| predict_with_thresholds(s, thresholds))
        .collect()
}
