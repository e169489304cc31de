//! Dual-problem assembly and a dense convex-QP solver.
//!
//! The training dual is a convex quadratic program over the stacked
//! variable vector `z = (zeta_1..zeta_n, tau_1..tau_n, theta_neg,
//! theta_pos)`:
//!
//! ```text
//!     minimize    1/2 z'Qz + q'z
//!     subject to  A_eq z = e          (score balance across classes)
//!                 A z <= a            (slack budget + coupled tau/theta caps)
//!                 l <= z <= u         (boxes; upper may be +inf)
//! ```
//!
//! `solve_qp` runs a Mehrotra-style predictor–corrector primal-dual
//! interior-point method with dense Cholesky factorizations. That choice
//! trades asymptotics for robustness: the coupled `tau_i <= w_i theta`
//! rows defeat the usual coordinate-wise SVM solvers, and at desk scale
//! (a few thousand points) an O(m^3) iteration is cheap.
//!
//! `verify_kkt` recomputes every optimality residual from the problem
//! data alone, sharing no code with the solver's internal bookkeeping,
//! so a buggy solver cannot certify itself.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::NoncoverageTargets;

/// Iteration cap for the interior-point loop.
const MAX_ITERATIONS: usize = 200;

/// Diagonal jitter factor applied before factorization; Gram matrices
/// are rank-deficient whenever training points repeat.
const JITTER_FACTOR: f64 = 1e-10;

/// Fraction-to-boundary step damping.
const STEP_DAMPING: f64 = 0.995;

/// Multiplier blow-up threshold for the infeasibility heuristic.
const INFEASIBILITY_CERT: f64 = 1e8;

/// Consecutive blow-up iterations required before declaring infeasible.
const INFEASIBILITY_PATIENCE: usize = 10;

/// Maps dual-variable semantics onto indices of the stacked vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n_points: usize,
}

impl VariableLayout {
    pub fn zeta(&self, i: usize) -> usize {
        i
    }

    pub fn tau(&self, i: usize) -> usize {
        self.n_points + i
    }

    pub fn theta(&self, label: i8) -> usize {
        2 * self.n_points + usize::from(label == 1)
    }

    /// Total variable count, `2n + 2`.
    pub fn len(&self) -> usize {
        2 * self.n_points + 2
    }
}

/// A convex QP in the standard form documented at the module level.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub q_matrix: DMatrix<f64>,
    pub q_linear: DVector<f64>,
    /// Inequality rows `A z <= a`.
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    /// Equality rows `A_eq z = e`; the training dual has exactly one.
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: DVector<f64>,
    /// Per-variable upper bounds; `f64::INFINITY` marks an open box.
    pub upper: DVector<f64>,
    pub layout: Option<VariableLayout>,
}

impl QpProblem {
    pub fn dim(&self) -> usize {
        self.q_linear.len()
    }

    /// A box-constrained QP without general rows (handy in tests).
    pub fn box_constrained(
        q_matrix: DMatrix<f64>,
        q_linear: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Self {
        let m = q_linear.len();
        QpProblem {
            q_matrix,
            q_linear,
            a_ineq: DMatrix::zeros(0, m),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, m),
            b_eq: DVector::zeros(0),
            lower,
            upper,
            layout: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.dim();
        if self.q_matrix.nrows() != m || self.q_matrix.ncols() != m {
            return Err(Error::InvalidArgument(format!(
                "quadratic term is {}x{}, expected {m}x{m}",
                self.q_matrix.nrows(),
                self.q_matrix.ncols()
            )));
        }
        if self.a_ineq.ncols() != m && self.a_ineq.nrows() > 0 {
            return Err(Error::InvalidArgument(
                "inequality matrix column count does not match the variable count".into(),
            ));
        }
        if self.a_ineq.nrows() != self.b_ineq.len() {
            return Err(Error::InvalidArgument(
                "inequality matrix and bound vector disagree on row count".into(),
            ));
        }
        if self.a_eq.ncols() != m && self.a_eq.nrows() > 0 {
            return Err(Error::InvalidArgument(
                "equality matrix column count does not match the variable count".into(),
            ));
        }
        if self.a_eq.nrows() != self.b_eq.len() {
            return Err(Error::InvalidArgument(
                "equality matrix and right-hand side disagree on row count".into(),
            ));
        }
        if self.lower.len() != m || self.upper.len() != m {
            return Err(Error::InvalidArgument(
                "box bound lengths do not match the variable count".into(),
            ));
        }
        for i in 0..m {
            if !self.lower[i].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "lower bound {i} must be finite"
                )));
            }
            if self.upper[i] < self.lower[i] {
                return Err(Error::InvalidArgument(format!(
                    "empty box for variable {i}: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        let sym_tol = 1e-9 * (1.0 + self.q_matrix.amax());
        for i in 0..m {
            for j in (i + 1)..m {
                if (self.q_matrix[(i, j)] - self.q_matrix[(j, i)]).abs() > sym_tol {
                    return Err(Error::InvalidArgument(format!(
                        "quadratic term is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// Scaled residual magnitudes of the four KKT groups.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }
}

/// Lagrange multipliers grouped by the constraint blocks of [`QpProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpMultipliers {
    pub eq: DVector<f64>,
    pub ineq: DVector<f64>,
    /// Per-variable lower-bound multipliers.
    pub lower: DVector<f64>,
    /// Per-variable upper-bound multipliers (zero for open boxes).
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Value of `1/2 z'Qz + q'z` at `z`. The training primal optimum is
    /// the negative of this value.
    pub objective: f64,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
    pub status: QpStatus,
    pub multipliers: QpMultipliers,
    /// Objective value after each interior-point iteration.
    pub objective_history: Vec<f64>,
}

/// Assembles the training dual for a weighted instance.
///
/// The quadratic coupling acts on `u = zeta + tau` through
/// `y_i y_j K_ij`; the linear term is `-1` on both slack blocks and
/// `n_j alpha_j` on the theta block. Constraint rows encode
/// `sum zeta_i - sum tau_i >= 0` and the coupled caps
/// `tau_i <= w_i theta_{y_i}`.
pub fn assemble_dual(
    gram: &DMatrix<f64>,
    labels: &[i8],
    weights: &[f64],
    lambda: f64,
    targets: &NoncoverageTargets,
) -> Result<QpProblem> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot assemble an empty dual".into()));
    }
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "gram matrix is {}x{}, expected {n}x{n}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if weights.len() != n {
        return Err(Error::InvalidArgument(
            "weight vector length does not match the label count".into(),
        ));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "the slack price must be positive and finite, got {lambda}"
        )));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "weight {w} at row {i}; constraint weights must lie in (0, 1]"
            )));
        }
    }
    check_gram_psd(gram)?;

    let n_neg = labels.iter().filter(|&&y| y == -1).count() as f64;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let layout = VariableLayout { n_points: n };
    let m = layout.len();

    // The quadratic form (zeta + tau)' [y_i y_j K_ij] (zeta + tau),
    // replicated over the four (zeta, tau) blocks; theta is linear only.
    let mut q_matrix = DMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            let v = f64::from(labels[i]) * f64::from(labels[j]) * gram[(i, j)];
            q_matrix[(i, j)] = v;
            q_matrix[(i, n + j)] = v;
            q_matrix[(n + i, j)] = v;
            q_matrix[(n + i, n + j)] = v;
        }
    }

    let mut q_linear = DVector::from_element(m, -1.0);
    q_linear[layout.theta(-1)] = n_neg * targets.alpha_neg();
    q_linear[layout.theta(1)] = n_pos * targets.alpha_pos();

    // Row 0: -(sum zeta - sum tau) <= 0. Rows 1..=n: tau_i - w_i theta <= 0.
    let mut a_ineq = DMatrix::zeros(n + 1, m);
    for i in 0..n {
        a_ineq[(0, layout.zeta(i))] = -1.0;
        a_ineq[(0, layout.tau(i))] = 1.0;
        a_ineq[(i + 1, layout.tau(i))] = 1.0;
        a_ineq[(i + 1, layout.theta(labels[i]))] = -weights[i];
    }
    let b_ineq = DVector::zeros(n + 1);

    let mut a_eq = DMatrix::zeros(1, m);
    for i in 0..n {
        a_eq[(0, layout.zeta(i))] = f64::from(labels[i]);
        a_eq[(0, layout.tau(i))] = f64::from(labels[i]);
    }
    let b_eq = DVector::zeros(1);

    let lower = DVector::zeros(m);
    let mut upper = DVector::from_element(m, f64::INFINITY);
    for i in 0..n {
        upper[layout.zeta(i)] = lambda;
    }

    Ok(QpProblem {
        q_matrix,
        q_linear,
        a_ineq,
        b_ineq,
        a_eq,
        b_eq,
        lower,
        upper,
        layout: Some(layout),
    })
}

/// Cheap PSD gate: a jittered Cholesky attempt, falling back to an
/// eigenvalue scan only to name the offending eigenvalue in the error.
fn check_gram_psd(gram: &DMatrix<f64>) -> Result<()> {
    let n = gram.nrows();
    let jitter = JITTER_FACTOR * (gram.trace() / n as f64).max(1.0);
    let mut shifted = gram.clone();
    for i in 0..n {
        shifted[(i, i)] += jitter;
    }
    if Cholesky::new(shifted).is_some() {
        return Ok(());
    }
    let eigs = gram.symmetric_eigenvalues();
    let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
    let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
    if min < -1e-8 * max.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "gram matrix is not positive semidefinite: eigenvalue {min:e}"
        )));
    }
    Ok(())
}

/// Constraint rows in sparse form for the solver's internal use.
struct SparseRow {
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// The problem flattened to `G z <= h` with box rows made explicit.
struct InternalForm {
    dim: usize,
    rows: Vec<SparseRow>,
    h: DVector<f64>,
    /// (variable, internal row) pairs for lower bounds.
    lower_rows: Vec<(usize, usize)>,
    /// (variable, internal row) pairs for finite upper bounds.
    upper_rows: Vec<(usize, usize)>,
}

impl InternalForm {
    fn build(problem: &QpProblem) -> Self {
        let m = problem.dim();
        let k = problem.a_ineq.nrows();
        let mut rows = Vec::new();
        let mut h = Vec::new();
        for r in 0..k {
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for c in 0..m {
                let v = problem.a_ineq[(r, c)];
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            rows.push(SparseRow { cols, vals });
            h.push(problem.b_ineq[r]);
        }
        let mut lower_rows = Vec::new();
        for i in 0..m {
            lower_rows.push((i, rows.len()));
            rows.push(SparseRow {
                cols: vec![i],
                vals: vec![-1.0],
            });
            h.push(-problem.lower[i]);
        }
        let mut upper_rows = Vec::new();
        for i in 0..m {
            if problem.upper[i].is_finite() {
                upper_rows.push((i, rows.len()));
                rows.push(SparseRow {
                    cols: vec![i],
                    vals: vec![1.0],
                });
                h.push(problem.upper[i]);
            }
        }
        InternalForm {
            dim: problem.dim(),
            rows,
            h: DVector::from_vec(h),
            lower_rows,
            upper_rows,
        }
    }

    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn mul(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_rows());
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (&c, &v) in row.cols.iter().zip(&row.vals) {
                acc += v * z[c];
            }
            out[r] = acc;
        }
        out
    }

    fn mul_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            let scale = v[r];
            if scale == 0.0 {
                continue;
            }
            for (&c, &val) in row.cols.iter().zip(&row.vals) {
                out[c] += val * scale;
            }
        }
        out
    }
}

/// Solves the QP to the given scaled tolerance.
///
/// Residuals are measured in the infinity norm and scaled by
/// `1 + ||q||_inf`; `Optimal` means every group fell below
/// `tol * (1 + ||q||_inf)` at the returned iterate.
pub fn solve_qp(problem: &QpProblem, tol: f64) -> Result<QpSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ipm::new(problem).run(tol)
}

struct Ipm<'a> {
    problem: &'a QpProblem,
    g: InternalForm,
    m_z: usize,
    m_eq: usize,
    m_in: usize,
    scale: f64,
    jitter: f64,
}

struct Iterate {
    z: DVector<f64>,
    y: DVector<f64>,
    lam: DVector<f64>,
    s: DVector<f64>,
}

impl<'a> Ipm<'a> {
    fn new(problem: &'a QpProblem) -> Self {
        let g = InternalForm::build(problem);
        let m_z = problem.dim();
        let m_eq = problem.a_eq.nrows();
        let m_in = g.n_rows();
        let scale = 1.0 + problem.q_linear.amax();
        let jitter =
            JITTER_FACTOR * (problem.q_matrix.trace() / m_z as f64).max(0.0) + 1e-14 * scale;
        Ipm {
            problem,
            g,
            m_z,
            m_eq,
            m_in,
            scale,
            jitter,
        }
    }

    fn start(&self) -> Iterate {
        let p = self.problem;
        let mut z = DVector::zeros(self.m_z);
        for i in 0..self.m_z {
            z[i] = if p.upper[i].is_finite() {
                0.5 * (p.lower[i] + p.upper[i])
            } else {
                p.lower[i] + 1.0
            };
        }
        let gz = self.g.mul(&z);
        let mut s = DVector::zeros(self.m_in);
        for i in 0..self.m_in {
            s[i] = (self.g.h[i] - gz[i]).max(1.0);
        }
        Iterate {
            z,
            y: DVector::zeros(self.m_eq),
            lam: DVector::from_element(self.m_in, 1.0),
            s,
        }
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * (z.transpose() * &self.problem.q_matrix * z)[(0, 0)]
            + self.problem.q_linear.dot(z)
    }

    fn residuals(&self, it: &Iterate) -> (DVector<f64>, DVector<f64>, DVector<f64>, f64) {
        let p = self.problem;
        let mut r_dual = &p.q_matrix * &it.z + &p.q_linear + self.g.mul_transpose(&it.lam);
        if self.m_eq > 0 {
            r_dual += p.a_eq.transpose() * &it.y;
        }
        let r_eq = if self.m_eq > 0 {
            &p.a_eq * &it.z - &p.b_eq
        } else {
            DVector::zeros(0)
        };
        let r_in = self.g.mul(&it.z) + &it.s - &self.g.h;
        let comp = (0..self.m_in)
            .map(|i| (it.s[i] * it.lam[i]).abs())
            .fold(0.0, f64::max);
        (r_dual, r_eq, r_in, comp)
    }

    fn run(self, tol: f64) -> Result<QpSolution> {
        let mut it = self.start();
        let threshold = tol * self.scale;
        let mut history = Vec::new();
        let mut best: Option<(f64, Iterate, KktResiduals)> = None;
        let mut blowup_streak = 0usize;
        let mut completed = 0usize;

        for iteration in 0..=MAX_ITERATIONS {
            completed = iteration;
            let (r_dual, r_eq, r_in, comp) = self.residuals(&it);
            let res = KktResiduals {
                stationarity: r_dual.amax(),
                primal_feasibility: r_eq.amax().max(r_in.amax()),
                dual_feasibility: (-it.lam.min()).max(0.0),
                complementarity: comp,
            };
            let worst = res.max();
            if best.as_ref().map_or(true, |(b, _, _)| worst < *b) {
                best = Some((
                    worst,
                    Iterate {
                        z: it.z.clone(),
                        y: it.y.clone(),
                        lam: it.lam.clone(),
                        s: it.s.clone(),
                    },
                    res,
                ));
            }
            if worst <= threshold {
                return Ok(self.finish(it, res, iteration, QpStatus::Optimal, history));
            }
            if iteration == MAX_ITERATIONS {
                break;
            }

            // Multiplier blow-up with stalled feasibility signals an
            // infeasible instance (the targets cannot be met).
            let cert = it.lam.amax().max(it.y.amax());
            if cert > INFEASIBILITY_CERT && cert > INFEASIBILITY_CERT * res.primal_feasibility {
                blowup_streak += 1;
                if blowup_streak >= INFEASIBILITY_PATIENCE {
                    let (_, b_it, b_res) = best.take().expect("tracked best iterate");
                    return Ok(self.finish(
                        b_it,
                        b_res,
                        iteration,
                        QpStatus::Infeasible,
                        history,
                    ));
                }
            } else {
                blowup_streak = 0;
            }

            // Barrier weights are clamped: near convergence lam/s spans
            // thirty orders of magnitude and unclamped values poison the
            // factorization.
            let w: DVector<f64> = DVector::from_iterator(
                self.m_in,
                (0..self.m_in).map(|i| (it.lam[i] / it.s[i]).clamp(1e-16, 1e16)),
            );
            let factor = match self.factor(&w) {
                Some(f) => f,
                None => break,
            };

            // Predictor: pure Newton step on the primal-dual system.
            let r_comp_aff: DVector<f64> = DVector::from_iterator(
                self.m_in,
                (0..self.m_in).map(|i| it.s[i] * it.lam[i]),
            );
            let Some((_dz_aff, _dy_aff, dlam_aff, ds_aff)) =
                self.direction(&factor, &w, &r_dual, &r_eq, &r_in, &r_comp_aff, &it)
            else {
                break;
            };
            let alpha_p_aff = max_step(&it.s, &ds_aff);
            let alpha_d_aff = max_step(&it.lam, &dlam_aff);

            let mu = it.s.dot(&it.lam) / self.m_in as f64;
            let mu_aff = (0..self.m_in)
                .map(|i| {
                    (it.s[i] + alpha_p_aff * ds_aff[i]) * (it.lam[i] + alpha_d_aff * dlam_aff[i])
                })
                .sum::<f64>()
                / self.m_in as f64;
            let sigma = if mu > 0.0 {
                (mu_aff / mu).clamp(0.0, 1.0).powi(3)
            } else {
                0.0
            };

            // Corrector: recenter and compensate the affine curvature.
            let r_comp: DVector<f64> = DVector::from_iterator(
                self.m_in,
                (0..self.m_in)
                    .map(|i| it.s[i] * it.lam[i] + ds_aff[i] * dlam_aff[i] - sigma * mu),
            );
            let Some((dz, dy, dlam, ds)) =
                self.direction(&factor, &w, &r_dual, &r_eq, &r_in, &r_comp, &it)
            else {
                break;
            };

            let alpha_p = (STEP_DAMPING * max_step(&it.s, &ds)).min(1.0);
            let alpha_d = (STEP_DAMPING * max_step(&it.lam, &dlam)).min(1.0);

            it.z += alpha_p * &dz;
            it.s += alpha_p * &ds;
            it.y += alpha_d * &dy;
            it.lam += alpha_d * &dlam;
            history.push(self.objective(&it.z));
        }

        let (_, b_it, b_res) = best.expect("at least one iterate was evaluated");
        Ok(self.finish(b_it, b_res, completed, QpStatus::MaxIter, history))
    }

    /// Cholesky of `Q + jitter I + G'WG`, retrying with diagonal shifts
    /// scaled to the matrix magnitude when extreme barrier weights erode
    /// positive definiteness. `None` means the iterate is numerically
    /// exhausted and the caller should return its best point.
    fn factor(&self, w: &DVector<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
        let mut h = self.problem.q_matrix.clone();
        for i in 0..self.m_z {
            h[(i, i)] += self.jitter;
        }
        for (r, row) in self.g.rows.iter().enumerate() {
            let weight = w[r];
            for (idx_a, (&ca, &va)) in row.cols.iter().zip(&row.vals).enumerate() {
                for (&cb, &vb) in row.cols.iter().zip(&row.vals).skip(idx_a) {
                    let contrib = weight * va * vb;
                    h[(ca, cb)] += contrib;
                    if ca != cb {
                        h[(cb, ca)] += contrib;
                    }
                }
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let scale = h.amax().max(1.0);
        let mut shift = 0.0;
        for _ in 0..7 {
            let mut trial = h.clone();
            if shift > 0.0 {
                for i in 0..self.m_z {
                    trial[(i, i)] += shift;
                }
            }
            if let Some(f) = Cholesky::new(trial) {
                return Some(f);
            }
            shift = if shift == 0.0 {
                scale * 1e-14
            } else {
                shift * 1e3
            };
        }
        None
    }

    /// Solves the saddle system `[H A_eq'; A_eq 0] (dz, dy) = (rhs, rhs_eq)`
    /// through the Schur complement on the (small) equality block.
    fn solve_kkt(
        &self,
        factor: &Cholesky<f64, nalgebra::Dyn>,
        rhs: &DVector<f64>,
        rhs_eq: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let v = factor.solve(rhs);
        if self.m_eq == 0 {
            return Some((v, DVector::zeros(0)));
        }
        let at = self.problem.a_eq.transpose();
        let x = factor.solve(&at);
        let schur = &self.problem.a_eq * &x;
        let rhs_y = &self.problem.a_eq * &v - rhs_eq;
        let dy = schur.lu().solve(&rhs_y)?;
        let dz = v - x * &dy;
        Some((dz, dy))
    }

    /// One Newton direction for the given complementarity target; `None`
    /// when the linear algebra degrades to non-finite values.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        factor: &Cholesky<f64, nalgebra::Dyn>,
        w: &DVector<f64>,
        r_dual: &DVector<f64>,
        r_eq: &DVector<f64>,
        r_in: &DVector<f64>,
        r_comp: &DVector<f64>,
        it: &Iterate,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
        // rhs = -r_dual - G'(W r_in - r_comp / s)
        let packed: DVector<f64> = DVector::from_iterator(
            self.m_in,
            (0..self.m_in).map(|i| w[i] * r_in[i] - r_comp[i] / it.s[i]),
        );
        let rhs = -r_dual - self.g.mul_transpose(&packed);
        let (dz, dy) = self.solve_kkt(factor, &rhs, &(-r_eq))?;
        let g_dz = self.g.mul(&dz);
        let ds: DVector<f64> =
            DVector::from_iterator(self.m_in, (0..self.m_in).map(|i| -r_in[i] - g_dz[i]));
        let dlam: DVector<f64> = DVector::from_iterator(
            self.m_in,
            (0..self.m_in).map(|i| (-r_comp[i] - it.lam[i] * ds[i]) / it.s[i]),
        );
        let finite = dz.iter().all(|v| v.is_finite())
            && dy.iter().all(|v| v.is_finite())
            && dlam.iter().all(|v| v.is_finite())
            && ds.iter().all(|v| v.is_finite());
        finite.then_some((dz, dy, dlam, ds))
    }

    fn finish(
        &self,
        it: Iterate,
        res: KktResiduals,
        iterations: usize,
        status: QpStatus,
        history: Vec<f64>,
    ) -> QpSolution {
        let k = self.problem.a_ineq.nrows();
        let mut ineq = DVector::zeros(k);
        for r in 0..k {
            ineq[r] = it.lam[r];
        }
        let mut lower = DVector::zeros(self.m_z);
        for &(var, row) in &self.g.lower_rows {
            lower[var] = it.lam[row];
        }
        let mut upper = DVector::zeros(self.m_z);
        for &(var, row) in &self.g.upper_rows {
            upper[var] = it.lam[row];
        }
        let scaled = KktResiduals {
            stationarity: res.stationarity / self.scale,
            primal_feasibility: res.primal_feasibility / self.scale,
            dual_feasibility: res.dual_feasibility / self.scale,
            complementarity: res.complementarity / self.scale,
        };
        QpSolution {
            objective: self.objective(&it.z),
            z: it.z,
            kkt_residuals: scaled,
            iterations,
            status,
            multipliers: QpMultipliers {
                eq: it.y,
                ineq,
                lower,
                upper,
            },
            objective_history: history,
        }
    }
}

/// Largest step in `[0, 1]` keeping `v + alpha dv` nonnegative.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha = 1.0f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

/// Pass/fail verdicts per KKT group at a given tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub residuals: KktResiduals,
    pub stationarity_ok: bool,
    pub primal_feasibility_ok: bool,
    pub dual_feasibility_ok: bool,
    pub complementarity_ok: bool,
}

impl KktReport {
    pub fn all_ok(&self) -> bool {
        self.stationarity_ok
            && self.primal_feasibility_ok
            && self.dual_feasibility_ok
            && self.complementarity_ok
    }
}

/// Recomputes all four KKT residual groups directly from the problem
/// data and the solution's point and multipliers.
///
/// This deliberately shares no code with the solver loop: gradients and
/// constraint values are rebuilt entry by entry.
pub fn verify_kkt(problem: &QpProblem, solution: &QpSolution, tol: f64) -> Result<KktReport> {
    problem.validate()?;
    let m = problem.dim();
    if solution.z.len() != m {
        return Err(Error::InvalidArgument(
            "solution dimension does not match the problem".into(),
        ));
    }
    let z = &solution.z;
    let mult = &solution.multipliers;
    let scale = 1.0 + problem.q_linear.amax();

    // Stationarity: Qz + q + A_eq' y + A_ineq' lam + mu_up - mu_lo.
    let mut stationarity = 0.0f64;
    for i in 0..m {
        let mut g = problem.q_linear[i];
        for j in 0..m {
            g += problem.q_matrix[(i, j)] * z[j];
        }
        for r in 0..problem.a_eq.nrows() {
            g += problem.a_eq[(r, i)] * mult.eq[r];
        }
        for r in 0..problem.a_ineq.nrows() {
            g += problem.a_ineq[(r, i)] * mult.ineq[r];
        }
        g += mult.upper[i] - mult.lower[i];
        stationarity = stationarity.max(g.abs());
    }

    // Primal feasibility: equality mismatch plus positive-part violations.
    let mut primal = 0.0f64;
    for r in 0..problem.a_eq.nrows() {
        let mut v = -problem.b_eq[r];
        for i in 0..m {
            v += problem.a_eq[(r, i)] * z[i];
        }
        primal = primal.max(v.abs());
    }
    let mut row_slack = vec![0.0f64; problem.a_ineq.nrows()];
    for r in 0..problem.a_ineq.nrows() {
        let mut v = 0.0;
        for i in 0..m {
            v += problem.a_ineq[(r, i)] * z[i];
        }
        row_slack[r] = problem.b_ineq[r] - v;
        primal = primal.max(-row_slack[r]);
    }
    for i in 0..m {
        primal = primal.max(problem.lower[i] - z[i]);
        if problem.upper[i].is_finite() {
            primal = primal.max(z[i] - problem.upper[i]);
        }
    }
    primal = primal.max(0.0);

    // Dual feasibility: every inequality multiplier is nonnegative.
    let mut dual = 0.0f64;
    for r in 0..problem.a_ineq.nrows() {
        dual = dual.max(-mult.ineq[r]);
    }
    for i in 0..m {
        dual = dual.max(-mult.lower[i]);
        dual = dual.max(-mult.upper[i]);
    }
    dual = dual.max(0.0);

    // Complementarity: multiplier times slack, per active set family.
    let mut comp = 0.0f64;
    for r in 0..problem.a_ineq.nrows() {
        comp = comp.max((mult.ineq[r] * row_slack[r]).abs());
    }
    for i in 0..m {
        comp = comp.max((mult.lower[i] * (z[i] - problem.lower[i])).abs());
        if problem.upper[i].is_finite() {
            comp = comp.max((mult.upper[i] * (problem.upper[i] - z[i])).abs());
        }
    }

    let residuals = KktResiduals {
        stationarity: stationarity / scale,
        primal_feasibility: primal / scale,
        dual_feasibility: dual / scale,
        complementarity: comp / scale,
    };
    Ok(KktReport {
        residuals,
        stationarity_ok: residuals.stationarity <= tol,
        primal_feasibility_ok: residuals.primal_feasibility <= tol,
        dual_feasibility_ok: residuals.dual_feasibility <= tol,
        complementarity_ok: residuals.complementarity <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NoncoverageTargets;
    use rand::Rng;

    fn targets(a_neg: f64, a_pos: f64) -> NoncoverageTargets {
        NoncoverageTargets::new(a_neg, a_pos).unwrap()
    }

    fn linear_gram(points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        DMatrix::from_fn(n, n, |i, j| {
            points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum()
        })
    }

    #[test]
    fn equality_row_pattern_single_point() {
        let gram = DMatrix::from_element(1, 1, 2.0);
        let problem = assemble_dual(&gram, &[-1], &[1.0], 0.5, &targets(0.3, 0.3)).unwrap();
        assert_eq!(problem.a_eq.nrows(), 1);
        let row: Vec<f64> = (0..4).map(|j| problem.a_eq[(0, j)]).collect();
        assert_eq!(row, vec![-1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_sign_pattern_for_opposite_labels() {
        // duplicated point with opposite labels: the zeta block carries
        // y_i y_j K_ij
        let points = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let gram = linear_gram(&points);
        let k = gram[(0, 0)];
        let problem = assemble_dual(&gram, &[1, -1], &[1.0, 1.0], 1.0, &targets(0.5, 0.5)).unwrap();
        assert_eq!(problem.q_matrix[(0, 0)], k);
        assert_eq!(problem.q_matrix[(0, 1)], -k);
        assert_eq!(problem.q_matrix[(1, 0)], -k);
        assert_eq!(problem.q_matrix[(1, 1)], k);
    }

    #[test]
    fn unit_weights_reduce_coupled_rows() {
        let gram = DMatrix::identity(2, 2);
        let problem = assemble_dual(&gram, &[1, -1], &[1.0, 1.0], 1.0, &targets(0.5, 0.5)).unwrap();
        let layout = problem.layout.unwrap();
        // row i+1 encodes tau_i - theta_{y_i} <= 0
        assert_eq!(problem.a_ineq[(1, layout.tau(0))], 1.0);
        assert_eq!(problem.a_ineq[(1, layout.theta(1))], -1.0);
        assert_eq!(problem.a_ineq[(2, layout.tau(1))], 1.0);
        assert_eq!(problem.a_ineq[(2, layout.theta(-1))], -1.0);
    }

    #[test]
    fn assemble_rejects_bad_inputs() {
        let gram = DMatrix::identity(2, 2);
        assert!(assemble_dual(&gram, &[1, -1], &[1.0, 1.0], 0.0, &targets(0.5, 0.5)).is_err());
        assert!(assemble_dual(&gram, &[1, -1], &[1.0, 1.5], 1.0, &targets(0.5, 0.5)).is_err());
        // indefinite matrix posing as a gram matrix
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = assemble_dual(&bad, &[1, -1], &[1.0, 1.0], 1.0, &targets(0.5, 0.5));
        match err {
            Err(crate::error::Error::Numerical(msg)) => {
                assert!(msg.contains("eigenvalue"), "{msg}")
            }
            other => panic!("expected a numerical error, got {other:?}"),
        }
    }

    #[test]
    fn separable_box_qp() {
        // min 1/2 z'z - 1'z over z >= 0 has the unconstrained optimum
        let problem = QpProblem::box_constrained(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-1.0, -1.0]),
            DVector::zeros(2),
            DVector::from_element(2, f64::INFINITY),
        );
        let sol = solve_qp(&problem, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 1.0).abs() < 1e-6);
        assert!((sol.z[1] - 1.0).abs() < 1e-6);
        assert!((sol.objective + 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_objective_pushed_to_bound() {
        let problem = QpProblem::box_constrained(
            DMatrix::zeros(1, 1),
            DVector::from_vec(vec![1.0]),
            DVector::zeros(1),
            DVector::from_element(1, 5.0),
        );
        let sol = solve_qp(&problem, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.z[0].abs() < 1e-6);
        assert!(sol.objective.abs() < 1e-6);
    }

    /// Brute-force oracle for tiny training duals. The objective depends
    /// on (zeta, tau) only through u = zeta + tau, and for fixed u the
    /// best theta is the smallest feasible one, so an exhaustive refined
    /// grid over u (one coordinate eliminated by the balance equality)
    /// covers the whole problem. The reduced problem is convex, so local
    /// refinement cannot get stuck.
    fn brute_force_dual(
        gram: &DMatrix<f64>,
        labels: &[i8],
        weights: &[f64],
        lambda: f64,
        t: &NoncoverageTargets,
    ) -> f64 {
        let n = labels.len();
        let n_neg = labels.iter().filter(|&&y| y == -1).count() as f64;
        let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let pivot = n - 1;

        let objective = |u: &[f64]| -> f64 {
            // feasibility of the split and the slack-budget row
            let mut cap = 0.0;
            let mut total = 0.0;
            for i in 0..n {
                if u[i] < 0.0 {
                    return f64::INFINITY;
                }
                cap += lambda.min(u[i]);
                total += u[i];
            }
            if cap + 1e-12 < 0.5 * total {
                return f64::INFINITY;
            }
            // smallest theta capping every tau_i = u_i - zeta_i
            let mut theta = [0.0f64; 2];
            for i in 0..n {
                let need = (u[i] - lambda) / weights[i];
                let side = usize::from(labels[i] == 1);
                theta[side] = theta[side].max(need.max(0.0));
            }
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += u[i] * u[j] * f64::from(labels[i]) * f64::from(labels[j]) * gram[(i, j)];
                }
            }
            0.5 * quad - total
                + n_neg * t.alpha_neg() * theta[0]
                + n_pos * t.alpha_pos() * theta[1]
        };

        // grid over the free coordinates; the pivot balances the equality
        let free = n - 1;
        let grid = 21usize;
        let mut center = vec![0.5 * lambda; free];
        let mut radius = lambda + 10.0;
        let mut best = f64::INFINITY;
        for _pass in 0..14 {
            let mut best_point = center.clone();
            let mut idx = vec![0usize; free];
            loop {
                let mut u = vec![0.0; n];
                for d in 0..free {
                    u[d] = (center[d] - radius + 2.0 * radius * idx[d] as f64 / (grid - 1) as f64)
                        .max(0.0);
                }
                // solve the balance equality for the pivot coordinate
                let partial: f64 = (0..free).map(|d| u[d] * f64::from(labels[d])).sum();
                let u_pivot = -f64::from(labels[pivot]) * partial;
                if u_pivot >= -1e-12 {
                    u[pivot] = u_pivot.max(0.0);
                    let v = objective(&u);
                    if v < best {
                        best = v;
                        best_point = u[..free].to_vec();
                    }
                }
                // odometer
                let mut d = 0;
                loop {
                    if d == free {
                        break;
                    }
                    idx[d] += 1;
                    if idx[d] < grid {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == free {
                    break;
                }
            }
            center = best_point;
            radius = (radius * 4.0 / (grid - 1) as f64).max(1e-9);
        }
        best
    }

    #[test]
    fn two_point_instance_matches_hand_derivation_and_oracle() {
        // x1 = (1), y1 = +1; x2 = (-1), y2 = -1; lambda = 1; alpha = 1/2.
        // The balance equality forces u1 = u2 = t and the objective
        // becomes 2t^2 - 2t with minimum -1/2 at t = 1/2.
        let points = vec![vec![1.0], vec![-1.0]];
        let gram = linear_gram(&points);
        let labels = [1i8, -1];
        let w = [1.0, 1.0];
        let t = targets(0.5, 0.5);
        let problem = assemble_dual(&gram, &labels, &w, 1.0, &t).unwrap();
        let sol = solve_qp(&problem, 1e-9).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.objective + 0.5).abs() < 1e-6, "{}", sol.objective);

        let oracle = brute_force_dual(&gram, &labels, &w, 1.0, &t);
        assert!((oracle + 0.5).abs() < 1e-4, "{oracle}");
        assert!((sol.objective - oracle).abs() < 1e-4);
    }

    fn random_instance(
        rng: &mut impl Rng,
        n: usize,
        p: usize,
    ) -> (DMatrix<f64>, Vec<i8>, Vec<f64>) {
        loop {
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..p).map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect();
            let labels: Vec<i8> = (0..n)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            if labels.iter().any(|&y| y == 1) && labels.iter().any(|&y| y == -1) {
                return (linear_gram(&points), labels, points.into_iter().flatten().collect());
            }
        }
    }

    #[test]
    fn random_instances_verify_at_tolerance() {
        let mut rng = crate::datagen::stream_rng(2024, 0);
        for _ in 0..20 {
            let n = rng.random_range(2..=12);
            let (gram, labels, _) = random_instance(&mut rng, n, 3);
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..=1.0)).collect();
            let lambda = rng.random_range(0.1..10.0);
            let t = targets(rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
            let problem = assemble_dual(&gram, &labels, &weights, lambda, &t).unwrap();
            let sol = solve_qp(&problem, 1e-8).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);
            let report = verify_kkt(&problem, &sol, 1e-6).unwrap();
            assert!(report.all_ok(), "{:?}", report.residuals);
        }
    }

    #[test]
    fn objective_settles_monotonically_near_convergence() {
        let mut rng = crate::datagen::stream_rng(7, 7);
        let (gram, labels, _) = random_instance(&mut rng, 10, 3);
        let w = vec![1.0; 10];
        let problem = assemble_dual(&gram, &labels, &w, 1.0, &targets(0.3, 0.3)).unwrap();
        let sol = solve_qp(&problem, 1e-10).unwrap();
        let h = &sol.objective_history;
        assert!(h.len() >= 5);
        let scale = 1.0 + sol.objective.abs();
        for pair in h[h.len() - 5..].windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6 * scale, "{:?}", &h[h.len() - 5..]);
        }
    }

    #[test]
    fn kkt_verification_flags_perturbations() {
        let gram = DMatrix::identity(3, 3);
        let labels = [1i8, -1, 1];
        let w = [1.0, 1.0, 1.0];
        let t = targets(0.4, 0.4);
        let problem = assemble_dual(&gram, &labels, &w, 1.0, &t).unwrap();
        let sol = solve_qp(&problem, 1e-9).unwrap();
        assert!(verify_kkt(&problem, &sol, 1e-6).unwrap().all_ok());

        // nudge one active variable: complementarity or feasibility breaks
        let mut bad = sol.clone();
        let active = (0..bad.z.len())
            .find(|&i| bad.z[i] > 0.05 && bad.multipliers.lower[i].abs() < 1e-3)
            .unwrap_or(0);
        bad.z[active] += 0.1;
        let report = verify_kkt(&problem, &bad, 1e-6).unwrap();
        assert!(
            !report.complementarity_ok || !report.primal_feasibility_ok || !report.stationarity_ok
        );
    }

    #[test]
    fn zero_point_fails_stationarity_when_gradient_is_nonzero() {
        let problem = QpProblem::box_constrained(
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![-1.0, -2.0]),
            DVector::zeros(2),
            DVector::from_element(2, f64::INFINITY),
        );
        let z0 = QpSolution {
            z: DVector::zeros(2),
            objective: 0.0,
            kkt_residuals: KktResiduals {
                stationarity: 0.0,
                primal_feasibility: 0.0,
                dual_feasibility: 0.0,
                complementarity: 0.0,
            },
            iterations: 0,
            status: QpStatus::MaxIter,
            multipliers: QpMultipliers {
                eq: DVector::zeros(0),
                ineq: DVector::zeros(0),
                lower: DVector::zeros(2),
                upper: DVector::zeros(2),
            },
            objective_history: vec![],
        };
        let report = verify_kkt(&problem, &z0, 1e-6).unwrap();
        assert!(!report.stationarity_ok);
    }

    #[test]
    fn slack_constraint_rows_force_theta_to_zero() {
        // complementary slackness through the full recovery path: when a
        // class's weighted constraint is strictly slack at the recovered
        // model, its theta variable must vanish
        use crate::recover::{recover_coefficients, solve_intercept_margin};
        let mut rng = crate::datagen::stream_rng(515, 0);
        let mut checked = 0;
        for _ in 0..12 {
            let n = rng.random_range(4..=20);
            let (gram, labels, _) = random_instance(&mut rng, n, 3);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=1.0)).collect();
            let lambda = rng.random_range(0.2..5.0);
            let t = targets(rng.random_range(0.2..1.0), rng.random_range(0.2..1.0));
            let problem = assemble_dual(&gram, &labels, &w, lambda, &t).unwrap();
            let sol = solve_qp(&problem, 1e-9).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal);

            let c = recover_coefficients(&sol, &labels).unwrap();
            let h: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| gram[(i, j)] * c[j]).sum())
                .collect();
            let fit = solve_intercept_margin(&h, &labels, &w, lambda, &t).unwrap();

            let layout = sol_layout(n);
            for class in [-1i8, 1] {
                let count = labels.iter().filter(|&&y| y == class).count() as f64;
                let budget = count * if class == 1 { t.alpha_pos() } else { t.alpha_neg() };
                let load: f64 = (0..n)
                    .filter(|&i| labels[i] == class)
                    .map(|i| w[i] * fit.eta[i])
                    .sum();
                if load < budget - 0.05 * budget {
                    let theta = sol.z[layout.theta(class)];
                    assert!(theta <= 1e-6 * (1.0 + budget), "theta {theta} at load {load}/{budget}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 0, "no instance had a strictly slack row");
    }

    fn sol_layout(n: usize) -> VariableLayout {
        VariableLayout { n_points: n }
    }

    #[test]
    fn contradictory_rows_are_flagged_infeasible() {
        // z >= 0 from the box against z <= -1 from the row
        let mut problem = QpProblem::box_constrained(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DVector::zeros(1),
            DVector::from_element(1, f64::INFINITY),
        );
        problem.a_ineq = DMatrix::from_row_slice(1, 1, &[1.0]);
        problem.b_ineq = DVector::from_vec(vec![-1.0]);
        let sol = solve_qp(&problem, 1e-8).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }
}
