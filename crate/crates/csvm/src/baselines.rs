//! Plug-in baselines: L2-penalized logistic regression and k-nearest
//! neighbours. Both produce monotone score functions that feed the same
//! robust calibration path as the trained SVM.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inference::Scorer;
use crate::types::Dataset;

/// Linear score model fit by penalized logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeLogistic {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the gradient at the returned point.
    pub gradient_norm: f64,
}

impl Scorer for RidgeLogistic {
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::Mismatch(format!(
                "probe has dimension {}, model expects {}",
                x.len(),
                self.coefficients.len()
            )));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(x)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.intercept)
    }
}

/// Minimizes the average logistic loss plus `penalty * ||beta||^2`
/// (intercept unpenalized) by damped Newton iterations.
///
/// Non-convergence within `max_iters` returns the last iterate with
/// `converged = false` rather than failing.
pub fn fit_ridge_logistic(
    data: &Dataset,
    penalty: f64,
    max_iters: usize,
    tol: f64,
) -> Result<RidgeLogistic> {
    data.require_both_classes()?;
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be positive and finite, got {penalty}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = data.n();
    let p = data.dim();
    let dim = p + 1; // trailing coordinate is the intercept

    let objective = |w: &DVector<f64>| -> f64 {
        let mut loss = 0.0;
        for i in 0..n {
            let margin = f64::from(data.label(i)) * linear_score(data.row(i), w);
            // log(1 + exp(-m)) computed stably on both tails
            loss += if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            };
        }
        let mut quad = 0.0;
        for j in 0..p {
            quad += w[j] * w[j];
        }
        loss / n as f64 + penalty * quad
    };

    let mut w = DVector::zeros(dim);
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    for iter in 0..max_iters {
        iterations = iter + 1;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let row = data.row(i);
            let y = f64::from(data.label(i));
            let margin = y * linear_score(row, &w);
            let sigma = 1.0 / (1.0 + margin.exp()); // = P(misclassify)
            let gi = -y * sigma / n as f64;
            let hi = (sigma * (1.0 - sigma)).max(1e-12) / n as f64;
            for a in 0..p {
                grad[a] += gi * row[a];
                for b in a..p {
                    hess[(a, b)] += hi * row[a] * row[b];
                }
                hess[(a, dim - 1)] += hi * row[a];
            }
            grad[dim - 1] += gi;
            hess[(dim - 1, dim - 1)] += hi;
        }
        for j in 0..p {
            grad[j] += 2.0 * penalty * w[j];
            hess[(j, j)] += 2.0 * penalty;
        }
        for a in 0..dim {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        grad_norm = grad.amax();
        if grad_norm <= tol {
            converged = true;
            break;
        }
        let step = hess
            .clone()
            .cholesky()
            .map(|f| f.solve(&grad))
            .ok_or_else(|| Error::Numerical("logistic Hessian is not positive definite".into()))?;

        // damping: halve until the objective decreases
        let base = objective(&w);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &w - scale * &step;
            if objective(&trial) < base {
                w = trial;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break; // no descent left at this precision
        }
    }

    Ok(RidgeLogistic {
        coefficients: w.as_slice()[..p].to_vec(),
        intercept: w[dim - 1],
        converged,
        iterations,
        gradient_norm: grad_norm,
    })
}

fn linear_score(row: &[f64], w: &DVector<f64>) -> f64 {
    let p = row.len();
    row.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>() + w[p]
}

/// k-nearest-neighbour score model: the fraction of positive labels
/// among the `k` closest training rows.
#[derive(Debug, Clone)]
pub struct Knn {
    train: Dataset,
    k: usize,
}

impl Knn {
    pub fn k(&self) -> usize {
        self.k
    }
}

pub fn fit_knn(data: &Dataset, k: usize) -> Result<Knn> {
    if k == 0 || k > data.n() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            data.n()
        )));
    }
    Ok(Knn {
        train: data.clone(),
        k,
    })
}

impl Scorer for Knn {
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.train.dim() {
            return Err(Error::Mismatch(format!(
                "probe has dimension {}, model expects {}",
                x.len(),
                self.train.dim()
            )));
        }
        // brute-force scan; distance ties break toward the lower index
        let mut order: Vec<(f64, usize)> = (0..self.train.n())
            .map(|i| {
                let d2: f64 = self
                    .train
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let positives = order[..self.k]
            .iter()
            .filter(|&&(_, i)| self.train.label(i) == 1)
            .count();
        Ok(positives as f64 / self.k as f64)
    }
}
