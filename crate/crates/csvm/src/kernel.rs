//! Kernel specifications and Gram-matrix construction.
//!
//! Three kernels are supported: linear `x'y`, Gaussian
//! `exp(-||x-y||^2 / rho^2)`, and the inhomogeneous polynomial
//! `(1 + x'y)^degree`. The polynomial offset and unit scale are a fixed
//! convention of this crate, chosen so results are reproducible.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Dataset;

/// Maximum accepted polynomial degree; higher degrees overflow f64 for
/// ordinary feature scales long before they are statistically useful.
pub const MAX_POLY_DEGREE: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    Linear,
    Gaussian { rho: f64 },
    Polynomial { degree: u32 },
}

impl KernelSpec {
    pub fn gaussian(rho: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { rho };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(degree: u32) -> Result<Self> {
        let spec = KernelSpec::Polynomial { degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { rho } => {
                if rho > 0.0 && rho.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "Gaussian bandwidth must be positive and finite, got {rho}"
                    )))
                }
            }
            KernelSpec::Polynomial { degree } => {
                if (1..=MAX_POLY_DEGREE).contains(&degree) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "polynomial degree must lie in 1..={MAX_POLY_DEGREE}, got {degree}"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Gaussian { rho } => write!(f, "gaussian:{rho}"),
            KernelSpec::Polynomial { degree } => write!(f, "poly:{degree}"),
        }
    }
}

/// Evaluates `K(x, y)` for two feature rows of equal dimension.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(eval_unchecked(spec, x, y))
}

/// Same as [`kernel_eval`] but skips validation; callers guarantee the
/// spec is valid and dimensions match.
pub(crate) fn eval_unchecked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Linear => dot(x, y),
        KernelSpec::Gaussian { rho } => {
            let mut d2 = 0.0;
            for (a, b) in x.iter().zip(y) {
                let d = a - b;
                d2 += d * d;
            }
            (-d2 / (rho * rho)).exp()
        }
        KernelSpec::Polynomial { degree } => (1.0 + dot(x, y)).powi(degree as i32),
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Builds the dense n x n Gram matrix of a dataset's rows.
///
/// The result is exactly symmetric (each pair is evaluated once) and
/// positive semidefinite up to rounding for the supported kernels.
pub fn gram_matrix(spec: &KernelSpec, data: &Dataset) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = data.n();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = data.row(i);
        for j in i..n {
            let value = eval_unchecked(spec, xi, data.row(j));
            gram[(i, j)] = value;
            gram[(j, i)] = value;
        }
    }
    Ok(gram)
}
