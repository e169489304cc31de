//! Primal recovery: kernel coefficients from the dual solution, then the
//! intercept and margin half-width by exact piecewise-linear minimization.
//!
//! With the kernel part fixed, the remaining problem in `(b, eps)` is
//!
//! ```text
//!     minimize    sum_i (1 + eps - y_i (h_i + b))_+
//!     subject to  sum_{y_i=j} w_i (1 - eps - y_i (h_i + b))_+ <= n_j alpha_j,
//!                 eps >= 0,
//! ```
//!
//! and each class-j constraint depends on `(b, eps)` only through
//! `u = eps + j b`. Both constraints therefore reduce to exact half-planes
//! `eps + j b >= u_j`, where `u_j` is the root of a one-dimensional
//! decreasing piecewise-linear function. The optimum then sits at an
//! intersection of objective kink lines, constraint boundary lines, and
//! the `eps = 0` axis — a finite candidate set we enumerate exhaustively.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qp::{QpSolution, QpStatus, VariableLayout};
use crate::types::NoncoverageTargets;

/// Feasibility slack for candidate filtering; final answers are clamped
/// back onto the exact constraint set.
const FEAS_TOL: f64 = 1e-9;

/// Recovers the kernel expansion coefficients `c_i = (zeta_i + tau_i) y_i`
/// from an optimal dual solution.
pub fn recover_coefficients(solution: &QpSolution, labels: &[i8]) -> Result<Vec<f64>> {
    if solution.status != QpStatus::Optimal {
        return Err(Error::InvalidArgument(format!(
            "coefficients can only be recovered from an optimal solution, status was {:?}",
            solution.status
        )));
    }
    let n = labels.len();
    let layout = VariableLayout { n_points: n };
    if solution.z.len() != layout.len() {
        return Err(Error::InvalidArgument(format!(
            "solution has {} variables, expected {} for {n} points",
            solution.z.len(),
            layout.len()
        )));
    }
    Ok((0..n)
        .map(|i| (solution.z[layout.zeta(i)] + solution.z[layout.tau(i)]) * f64::from(labels[i]))
        .collect())
}

/// The minimizer of the restricted primal together with its slacks.
#[derive(Debug, Clone, PartialEq)]
pub struct InterceptMargin {
    pub intercept: f64,
    pub margin: f64,
    /// Ambiguity slacks `(1 + eps - y_i f_i)_+`.
    pub xi: Vec<f64>,
    /// Coverage slacks `(1 - eps - y_i f_i)_+`.
    pub eta: Vec<f64>,
    /// Objective value `sum_i xi_i` at the minimizer.
    pub objective: f64,
}

/// Solves for the intercept and margin given the fixed kernel part
/// `h_i = sum_j c_j K(x_j, x_i)` at the training points.
///
/// Ties among optimal vertices resolve to the smallest margin, then the
/// smallest `|b|`, then the smaller `b`, so the result does not depend
/// on row order.
pub fn solve_intercept_margin(
    h: &[f64],
    labels: &[i8],
    weights: &[f64],
    lambda: f64,
    targets: &NoncoverageTargets,
) -> Result<InterceptMargin> {
    let n = labels.len();
    if h.len() != n || weights.len() != n {
        return Err(Error::InvalidArgument(
            "kernel values, labels, and weights must have equal lengths".into(),
        ));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "kernel values must be finite".into(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "the slack price must be positive, got {lambda}"
        )));
    }
    let n_neg = labels.iter().filter(|&&y| y == -1).count();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_neg == 0 || n_pos == 0 {
        return Err(Error::InvalidArgument(
            "intercept recovery requires both classes".into(),
        ));
    }

    // Constraint boundaries: u_j = min { u : G_j(u) <= n_j alpha_j } with
    // G_j(u) = sum_{y_i=j} w_i ((1 - y_i h_i) - u)_+.
    let u_pos = constraint_boundary(h, labels, weights, 1, n_pos as f64 * targets.alpha_pos());
    let u_neg = constraint_boundary(h, labels, weights, -1, n_neg as f64 * targets.alpha_neg());

    // Candidate lines in the (b, eps) plane, all of slope +1 or -1:
    //   objective kinks  eps = y_i b + (y_i h_i - 1)
    //   class +1 boundary eps = -b + u_pos
    //   class -1 boundary eps =  b + u_neg
    let mut pos_lines = vec![u_neg]; // slope +1, stored intercept
    let mut neg_lines = vec![u_pos]; // slope -1
    for i in 0..n {
        let intercept = f64::from(labels[i]) * h[i] - 1.0;
        if labels[i] == 1 {
            pos_lines.push(intercept);
        } else {
            neg_lines.push(intercept);
        }
    }

    let feasible = |b: f64, eps: f64| {
        eps >= -FEAS_TOL && eps + b >= u_pos - FEAS_TOL && eps - b >= u_neg - FEAS_TOL
    };
    let objective = |b: f64, eps: f64| {
        let mut total = 0.0;
        for i in 0..n {
            total += (1.0 + eps - f64::from(labels[i]) * (h[i] + b)).max(0.0);
        }
        total
    };

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for &cp in &pos_lines {
        for &cn in &neg_lines {
            // eps = b + cp and eps = -b + cn
            let b = 0.5 * (cn - cp);
            let eps = 0.5 * (cn + cp);
            candidates.push((b, eps));
        }
    }
    for &cp in &pos_lines {
        candidates.push((-cp, 0.0));
    }
    for &cn in &neg_lines {
        candidates.push((cn, 0.0));
    }

    let mut best: Option<(f64, f64, f64)> = None; // (objective, eps, b)
    for &(b, eps) in &candidates {
        if !feasible(b, eps) {
            continue;
        }
        let eps = eps.max(0.0);
        let value = objective(b, eps);
        let better = match best {
            None => true,
            Some((bv, be, bb)) => {
                (value, eps, b.abs(), b) < (bv, be, bb.abs(), bb)
            }
        };
        if better {
            best = Some((value, eps, b));
        }
    }

    let (objective_value, margin, intercept) = best.ok_or_else(|| {
        Error::Infeasible(
            "the weighted coverage constraints cannot be met with this kernel part; \
             the non-coverage targets are too strict"
                .into(),
        )
    })?;

    let mut xi = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for i in 0..n {
        let m = f64::from(labels[i]) * (h[i] + intercept);
        xi.push((1.0 + margin - m).max(0.0));
        eta.push((1.0 - margin - m).max(0.0));
    }
    Ok(InterceptMargin {
        intercept,
        margin,
        xi,
        eta,
        objective: objective_value,
    })
}

/// Smallest `u` with `sum w_i (a_i - u)_+ <= budget` for the rows of one
/// class, found by walking the sorted breakpoints of the left-hand side.
fn constraint_boundary(h: &[f64], labels: &[i8], weights: &[f64], class: i8, budget: f64) -> f64 {
    let mut points: Vec<(f64, f64)> = labels
        .iter()
        .zip(h)
        .zip(weights)
        .filter(|((&y, _), _)| y == class)
        .map(|((_, &hi), &wi)| (1.0 - f64::from(class) * hi, wi))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Suffix sums over breakpoints in ascending order; on the segment
    // below points[k].0 the function is T_k - S_k u.
    let m = points.len();
    let mut suffix_w = vec![0.0; m + 1];
    let mut suffix_wa = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix_w[k] = suffix_w[k + 1] + points[k].1;
        suffix_wa[k] = suffix_wa[k + 1] + points[k].1 * points[k].0;
    }
    for k in 0..m {
        let upper = points[k].0;
        let candidate = (suffix_wa[k] - budget) / suffix_w[k];
        if candidate <= upper {
            return candidate;
        }
    }
    // budget >= 0 is satisfied at the largest breakpoint already
    points.last().map_or(f64::NEG_INFINITY, |p| p.0)
}

/// Convenience used by the trainer: `h = gram * c` as a plain vector.
pub(crate) fn kernel_part(gram: &nalgebra::DMatrix<f64>, coefficients: &[f64]) -> Vec<f64> {
    let c = DVector::from_column_slice(coefficients);
    (gram * c).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{KktResiduals, QpMultipliers, QpSolution, QpStatus};
    use nalgebra::DVector;

    fn fake_solution(z: Vec<f64>, status: QpStatus) -> QpSolution {
        let m = z.len();
        QpSolution {
            z: DVector::from_vec(z),
            objective: 0.0,
            kkt_residuals: KktResiduals {
                stationarity: 0.0,
                primal_feasibility: 0.0,
                dual_feasibility: 0.0,
                complementarity: 0.0,
            },
            iterations: 0,
            status,
            multipliers: QpMultipliers {
                eq: DVector::zeros(1),
                ineq: DVector::zeros(0),
                lower: DVector::zeros(m),
                upper: DVector::zeros(m),
            },
            objective_history: vec![],
        }
    }

    #[test]
    fn zero_dual_gives_zero_coefficients() {
        let sol = fake_solution(vec![0.0; 6], QpStatus::Optimal);
        let c = recover_coefficients(&sol, &[1, -1]).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn coefficient_formula() {
        // zeta_1 = 0.5, tau_1 = 0.25, y_1 = -1 -> c_1 = -0.75
        let sol = fake_solution(vec![0.5, 0.0, 0.25, 0.0, 0.0, 0.0], QpStatus::Optimal);
        let c = recover_coefficients(&sol, &[-1, 1]).unwrap();
        assert!((c[0] + 0.75).abs() < 1e-15);
        assert_eq!(c[1], 0.0);
    }

    #[test]
    fn non_optimal_solution_rejected() {
        let sol = fake_solution(vec![0.0; 6], QpStatus::MaxIter);
        assert!(recover_coefficients(&sol, &[1, -1]).is_err());
    }

    #[test]
    fn dual_to_primal_identity_linear_kernel() {
        // With a linear kernel, sum_i c_i (x_i . x) must equal beta . x for
        // beta = sum_i (zeta_i + tau_i) y_i x_i; this is an algebraic
        // identity, checked on arbitrary multipliers and probes.
        let x = [
            [0.3, -1.2, 0.5],
            [1.1, 0.4, -0.7],
            [-0.9, 2.0, 0.1],
            [0.0, -0.5, 1.3],
        ];
        let y = [1i8, -1, 1, -1];
        let zeta = [0.2, 0.0, 0.7, 0.4];
        let tau = [0.1, 0.5, 0.0, 0.3];
        let mut z = Vec::new();
        z.extend_from_slice(&zeta);
        z.extend_from_slice(&tau);
        z.extend_from_slice(&[0.0, 0.0]);
        let sol = fake_solution(z, QpStatus::Optimal);
        let c = recover_coefficients(&sol, &y).unwrap();

        let mut beta = [0.0; 3];
        for i in 0..4 {
            for d in 0..3 {
                beta[d] += (zeta[i] + tau[i]) * f64::from(y[i]) * x[i][d];
            }
        }
        let probes = [
            [0.5, 0.5, 0.5],
            [-1.0, 0.2, 0.9],
            [2.0, -2.0, 0.0],
            [0.1, 0.1, -0.1],
            [10.0, 3.0, -4.0],
            [-0.33, 0.77, 0.11],
            [1.5, -0.4, 2.2],
            [0.0, 0.0, 0.0],
            [-2.5, -2.5, 5.0],
            [0.25, 1.25, -1.75],
        ];
        for probe in probes {
            let via_kernel: f64 = (0..4)
                .map(|i| c[i] * x[i].iter().zip(&probe).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            let via_beta: f64 = beta.iter().zip(&probe).map(|(a, b)| a * b).sum();
            assert!((via_kernel - via_beta).abs() < 1e-9);
        }
    }

    /// Brute-force (b, eps) oracle: dense grid refined around the best
    /// feasible cell. Only used to cross-check the exact enumeration.
    fn grid_oracle(
        h: &[f64],
        labels: &[i8],
        weights: &[f64],
        targets: &NoncoverageTargets,
    ) -> (f64, f64, f64) {
        let n_neg = labels.iter().filter(|&&y| y == -1).count() as f64;
        let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let objective = |b: f64, eps: f64| -> f64 {
            labels
                .iter()
                .zip(h)
                .map(|(&y, &hi)| (1.0 + eps - f64::from(y) * (hi + b)).max(0.0))
                .sum()
        };
        let feasible = |b: f64, eps: f64| -> bool {
            for (class, budget) in [(-1i8, n_neg * targets.alpha_neg()), (1, n_pos * targets.alpha_pos())] {
                let lhs: f64 = labels
                    .iter()
                    .zip(h)
                    .zip(weights)
                    .filter(|((&y, _), _)| y == class)
                    .map(|((_, &hi), &wi)| {
                        wi * (1.0 - eps - f64::from(class) * (hi + b)).max(0.0)
                    })
                    .sum();
                if lhs > budget + 1e-12 {
                    return false;
                }
            }
            true
        };
        let (mut b_lo, mut b_hi) = (-12.0, 12.0);
        let (mut e_lo, mut e_hi) = (0.0, 12.0);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for _ in 0..12 {
            let mut incumbent = best;
            for ib in 0..=60 {
                let b = b_lo + (b_hi - b_lo) * ib as f64 / 60.0;
                for ie in 0..=60 {
                    let eps = e_lo + (e_hi - e_lo) * ie as f64 / 60.0;
                    if eps < 0.0 || !feasible(b, eps) {
                        continue;
                    }
                    let v = objective(b, eps);
                    if v < incumbent.0 {
                        incumbent = (v, eps, b);
                    }
                }
            }
            best = incumbent;
            let db = (b_hi - b_lo) / 60.0 * 2.5;
            let de = (e_hi - e_lo) / 60.0 * 2.5;
            b_lo = best.2 - db;
            b_hi = best.2 + db;
            e_lo = (best.1 - de).max(0.0);
            e_hi = best.1 + de;
        }
        best
    }

    #[test]
    fn separable_instance_reaches_zero_objective() {
        let h = [-5.0, -5.0, 5.0, 5.0];
        let labels = [-1i8, -1, 1, 1];
        let w = [1.0; 4];
        let targets = NoncoverageTargets::new(0.05, 0.05).unwrap();
        let sol = solve_intercept_margin(&h, &labels, &w, 1.0, &targets).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.margin >= 0.0);
        // constraints strictly slack: every eta is zero
        assert!(sol.eta.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn flat_kernel_part_picks_majority_class_intercept() {
        // h = 0 and weights 1/2 make the weighted coverage constraints
        // vacuous for alpha = 1; the optimum is eps = 0 with b at the
        // majority-class breakpoint.
        let h = [0.0; 4];
        let labels = [1i8, 1, 1, -1];
        let w = [0.5; 4];
        let targets = NoncoverageTargets::new(1.0, 1.0).unwrap();
        let sol = solve_intercept_margin(&h, &labels, &w, 1.0, &targets).unwrap();
        assert!((sol.intercept - 1.0).abs() < 1e-12);
        assert_eq!(sol.margin, 0.0);
        assert!((sol.objective - 2.0).abs() < 1e-12);

        let oracle = grid_oracle(&h, &labels, &w, &targets);
        assert!((sol.objective - oracle.0).abs() < 1e-6);
    }

    #[test]
    fn matches_grid_oracle_on_irregular_instances() {
        let cases: [(&[f64], &[i8], &[f64], (f64, f64)); 3] = [
            (
                &[0.4, -1.1, 0.9, 0.2, -0.6],
                &[1, -1, 1, -1, 1],
                &[1.0, 0.8, 1.0, 0.5, 0.9],
                (0.2, 0.3),
            ),
            (
                &[2.0, 1.5, -0.5, -2.2],
                &[1, 1, -1, -1],
                &[1.0, 1.0, 1.0, 1.0],
                (0.5, 0.25),
            ),
            (
                &[0.0, 0.1, -0.1, 0.05, -0.05, 0.2],
                &[1, -1, 1, -1, 1, -1],
                &[0.6, 0.6, 0.6, 0.6, 0.6, 0.6],
                (0.4, 0.4),
            ),
        ];
        for (h, labels, w, (a_neg, a_pos)) in cases {
            let targets = NoncoverageTargets::new(a_neg, a_pos).unwrap();
            let sol = solve_intercept_margin(h, labels, w, 1.0, &targets).unwrap();
            let oracle = grid_oracle(h, labels, w, &targets);
            assert!(
                (sol.objective - oracle.0).abs() < 1e-5,
                "exact {} vs oracle {}",
                sol.objective,
                oracle.0
            );
            assert!(sol.objective <= oracle.0 + 1e-9);
        }
    }

    #[test]
    fn optimal_among_random_feasible_probes() {
        let h = [0.7, -0.3, 1.2, -1.4, 0.1, 0.4];
        let labels = [1i8, -1, 1, -1, -1, 1];
        let w = [1.0, 0.9, 0.8, 1.0, 0.7, 1.0];
        let targets = NoncoverageTargets::new(0.3, 0.3).unwrap();
        let sol = solve_intercept_margin(&h, &labels, &w, 1.0, &targets).unwrap();

        // pseudo-random but deterministic probes, projected to feasibility
        // by lifting eps
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let objective = |b: f64, eps: f64| -> f64 {
            labels
                .iter()
                .zip(&h)
                .map(|(&y, &hi)| (1.0 + eps - f64::from(y) * (hi + b)).max(0.0))
                .sum()
        };
        for _ in 0..100 {
            let b = next() * 8.0 - 4.0;
            let mut eps = next() * 4.0;
            // lift eps until both weighted constraints hold
            for _ in 0..200 {
                let ok = [(-1i8, 3.0 * 0.3), (1, 3.0 * 0.3)].iter().all(|&(class, budget)| {
                    labels
                        .iter()
                        .zip(&h)
                        .zip(&w)
                        .filter(|((&y, _), _)| y == class)
                        .map(|((_, &hi), &wi)| {
                            wi * (1.0 - eps - f64::from(class) * (hi + b)).max(0.0)
                        })
                        .sum::<f64>()
                        <= budget
                });
                if ok {
                    break;
                }
                eps += 0.05;
            }
            assert!(sol.objective <= objective(b, eps) + 1e-9);
        }
    }
}
