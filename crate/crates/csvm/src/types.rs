//! Shared domain types and the two loss/decision primitives everything
//! else is built from: the shifted hinge loss and margin-based set
//! prediction.
//!
//! All types here are immutable after construction and safe to share
//! across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// A labeled sample: row-major feature matrix plus ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    features: Vec<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer and ±1 labels.
    ///
    /// Rejects non-finite features, any label outside {−1, +1}, and
    /// buffer/label length mismatches.
    pub fn new(n: usize, p: usize, features: Vec<f64>, labels: Vec<i8>) -> Result<Self> {
        if features.len() != n * p {
            return Err(Error::InvalidArgument(format!(
                "feature buffer has {} entries, expected {}x{}={}",
                features.len(),
                n,
                p,
                n * p
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at row {}, column {}",
                i / p,
                i % p
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != -1 && y != 1) {
            return Err(Error::InvalidArgument(format!(
                "label {} at row {i}; only -1 and 1 are accepted",
                labels[i]
            )));
        }
        Ok(Self {
            n,
            p,
            features,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    /// Number of class −1 rows.
    pub fn n_neg(&self) -> usize {
        self.labels.iter().filter(|&&y| y == -1).count()
    }

    /// Number of class +1 rows.
    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Fails unless both classes are represented; training requires it.
    pub fn require_both_classes(&self) -> Result<()> {
        if self.n_neg() == 0 || self.n_pos() == 0 {
            return Err(Error::InvalidArgument(
                "dataset must contain at least one row of each class".into(),
            ));
        }
        Ok(())
    }

    /// Returns the rows of `indices` as a new dataset (used by tests and
    /// by the benchmark harness for subsampling).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.p);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.n
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(indices.len(), self.p, features, labels)
    }
}

/// Per-class non-coverage budgets, each strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoncoverageTargets {
    alpha_neg: f64,
    alpha_pos: f64,
}

impl NoncoverageTargets {
    pub fn new(alpha_neg: f64, alpha_pos: f64) -> Result<Self> {
        for (name, a) in [("alpha_neg", alpha_neg), ("alpha_pos", alpha_pos)] {
            if !(a > 0.0 && a <= 1.0) || !a.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {a}; non-coverage targets must lie in (0, 1]"
                )));
            }
        }
        Ok(Self {
            alpha_neg,
            alpha_pos,
        })
    }

    pub fn alpha_neg(&self) -> f64 {
        self.alpha_neg
    }

    pub fn alpha_pos(&self) -> f64 {
        self.alpha_pos
    }

    /// Target for the class of the given label.
    pub fn alpha_for(&self, label: i8) -> f64 {
        if label == 1 {
            self.alpha_pos
        } else {
            self.alpha_neg
        }
    }
}

/// A set-valued decision: one of {−1}, {+1}, or {−1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetLabel {
    NegOnly,
    PosOnly,
    Both,
}

impl SetLabel {
    /// Does the predicted set contain class `label`?
    pub fn covers(&self, label: i8) -> bool {
        match self {
            SetLabel::NegOnly => label == -1,
            SetLabel::PosOnly => label == 1,
            SetLabel::Both => true,
        }
    }
}

/// A trained confidence-set SVM: kernel expansion coefficients, an
/// intercept, and the solved margin half-width.
///
/// The discriminant is `f(x) = sum_i c_i K(x_i, x) + b`; the ambiguity
/// region of the raw model is `{x : |f(x)| <= margin}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvmModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub margin: f64,
    pub kernel: KernelSpec,
    pub support: Dataset,
    /// Constraint weights used on the final training pass.
    pub weights_final: Vec<f64>,
}

impl CsvmModel {
    pub fn validate(&self) -> Result<()> {
        if self.margin < 0.0 || !self.margin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "margin must be finite and nonnegative, got {}",
                self.margin
            )));
        }
        if self.coefficients.len() != self.support.n()
            || self.weights_final.len() != self.support.n()
        {
            return Err(Error::InvalidArgument(
                "coefficient/weight length must match the number of support rows".into(),
            ));
        }
        self.kernel.validate()
    }
}

/// Inputs to the finite-sample bound and constant calculators: an RKHS
/// norm bound `s`, the kernel sup bound `r = sup_x K(x, x)`, the margin
/// gap `c`, and a confidence level `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub norm_bound: f64,
    pub kernel_sup: f64,
    pub margin_gap: f64,
    pub confidence: f64,
}

impl TheoryParams {
    pub fn new(norm_bound: f64, kernel_sup: f64, margin_gap: f64, confidence: f64) -> Result<Self> {
        if !(norm_bound > 0.0) || !(kernel_sup > 0.0) || !(margin_gap > 0.0) {
            return Err(Error::InvalidArgument(
                "norm bound, kernel sup, and margin gap must all be positive".into(),
            ));
        }
        // confidence = 1 is allowed so the log term can be switched off.
        if !(confidence > 0.0 && confidence <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence must lie in (0, 1], got {confidence}"
            )));
        }
        Ok(Self {
            norm_bound,
            kernel_sup,
            margin_gap,
            confidence,
        })
    }
}

/// The shifted hinge loss `(1 + a - u)_+`.
///
/// `a = 0` recovers the usual hinge; the ambiguity objective uses
/// `a = margin` and the coverage constraints use `a = -margin`.
pub fn shifted_hinge(shift: f64, margin: f64) -> Result<f64> {
    if !shift.is_finite() || !margin.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "shifted_hinge requires finite inputs, got shift={shift}, margin={margin}"
        )));
    }
    Ok((1.0 + shift - margin).max(0.0))
}

/// Set-valued decision from a raw score and a margin half-width: scores
/// beyond `±margin` are definite, the closed band `[-margin, margin]`
/// is ambiguous.
pub fn classify_by_margin(f_value: f64, margin: f64) -> Result<SetLabel> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must be nonnegative, got {margin}"
        )));
    }
    Ok(if f_value > margin {
        SetLabel::PosOnly
    } else if f_value < -margin {
        SetLabel::NegOnly
    } else {
        SetLabel::Both
    })
}
