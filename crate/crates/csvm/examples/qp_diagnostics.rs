//! Look inside one training solve: assemble the dual, run the
//! interior-point method, verify the optimality conditions through the
//! independent checker, and close the duality gap against the recovered
//! primal.
//!
//! ```bash
//! cargo run --example qp_diagnostics
//! ```

use csvm::datagen::gen_example1;
use csvm::kernel::gram_matrix;
use csvm::qp::{assemble_dual, solve_qp, verify_kkt};
use csvm::recover::{recover_coefficients, solve_intercept_margin};
use csvm::types::NoncoverageTargets;
use csvm::KernelSpec;

fn main() -> csvm::Result<()> {
    let data = gen_example1(80, 6, 99)?;
    let targets = NoncoverageTargets::new(0.1, 0.1)?;
    let lambda = 0.5;
    let weights = vec![1.0; data.n()];

    let gram = gram_matrix(&KernelSpec::Linear, &data)?;
    let problem = assemble_dual(&gram, data.labels(), &weights, lambda, &targets)?;
    println!(
        "dual problem: {} variables, {} inequality rows, 1 equality row",
        problem.dim(),
        problem.a_ineq.nrows()
    );

    let solution = solve_qp(&problem, 1e-8)?;
    println!(
        "status {:?} after {} iterations, objective {:.6}",
        solution.status, solution.iterations, solution.objective
    );
    println!("solver residuals (scaled): {:?}", solution.kkt_residuals);

    let report = verify_kkt(&problem, &solution, 1e-6)?;
    println!(
        "independent KKT check: stationarity {}, primal {}, dual {}, complementarity {}",
        report.stationarity_ok,
        report.primal_feasibility_ok,
        report.dual_feasibility_ok,
        report.complementarity_ok
    );

    // primal recovery and the duality gap
    let c = recover_coefficients(&solution, data.labels())?;
    let h: Vec<f64> = (0..data.n())
        .map(|i| (0..data.n()).map(|j| gram[(i, j)] * c[j]).sum())
        .collect();
    let fit = solve_intercept_margin(&h, data.labels(), &weights, lambda, &targets)?;
    let quad: f64 = c.iter().zip(&h).map(|(a, b)| a * b).sum();
    let primal = 0.5 * quad + lambda * fit.objective;
    println!(
        "recovered primal {:.10} vs dual optimum {:.10} (gap {:.2e})",
        primal,
        -solution.objective,
        (primal + solution.objective).abs()
    );
    println!(
        "support points: {} of {}",
        c.iter().filter(|v| v.abs() > 1e-6).count(),
        data.n()
    );
    Ok(())
}
