//! Sparse coefficient recovery for `Lambda xi ~ b`.

mod lasso;
mod qp;
mod refit;
mod sqrt_lasso;

pub use lasso::{lasso, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
pub use qp::{lasso_qp_oracle, QP_MAX_TERMS};
pub use refit::{threshold_and_refit, DEFAULT_REL_TOL};
pub use sqrt_lasso::{belloni_penalty, sqrt_lasso, SQRT_LASSO_MAX_OUTER};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// `min ||A xi - b||_2^2 + mu ||xi||_1`.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    pub mu: f64,
    /// Solve in the basis of unit-norm columns and map back.
    pub normalize_columns: bool,
}

impl RegressionProblem {
    pub fn new(design: DMatrix<f64>, target: DVector<f64>, mu: f64) -> Result<RegressionProblem> {
        if design.nrows() != target.len() {
            return Err(Error::invalid(format!(
                "design has {} rows, target has {} entries",
                design.nrows(),
                target.len()
            )));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!("penalty mu must be finite and >= 0, got {mu}")));
        }
        if design.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("regression data must be finite"));
        }
        Ok(RegressionProblem { design, target, mu, normalize_columns: false })
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize_columns = on;
        self
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    pub fn terms(&self) -> usize {
        self.design.ncols()
    }

    pub fn residual(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.design * xi - &self.target
    }

    /// Per-coefficient penalty weights: the column norms when normalizing
    /// (the penalty then acts on the unit-column coefficients), ones otherwise.
    pub fn penalty_weights(&self) -> Vec<f64> {
        if self.normalize_columns {
            self.column_norms()
        } else {
            vec![1.0; self.terms()]
        }
    }

    /// `||A xi - b||^2 + mu sum_j w_j |xi_j|`.
    pub fn objective(&self, xi: &DVector<f64>) -> f64 {
        let penalty: f64 = self.penalty_weights().iter().zip(xi.iter()).map(|(w, v)| w * v.abs()).sum();
        self.residual(xi).norm_squared() + self.mu * penalty
    }

    fn column_norms(&self) -> Vec<f64> {
        self.design.column_iter().map(|c| c.norm()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    LassoCd,
    Qp,
    SqrtLasso,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::LassoCd => "lasso_cd",
            Method::Qp => "qp",
            Method::SqrtLasso => "sqrt_lasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct SparseSolution {
    pub xi: DVector<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub method: Method,
    /// Penalty actually handed to the inner solver (differs from the problem's
    /// for the square-root LASSO).
    pub effective_mu: f64,
    pub refit: bool,
    pub warnings: Vec<String>,
}

pub(crate) fn nonzero_support(xi: &DVector<f64>) -> Vec<usize> {
    xi.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect()
}

/// Largest violation of the LASSO optimality conditions at `xi`, with
/// `g = 2 A^T (A xi - b)`: `|g_j + mu sign(xi_j)|` on the support and
/// `max(0, |g_j| - mu)` off it.
///
/// For normalized problems both `g_j` and the penalty are taken in the
/// unit-column basis.
pub fn kkt_check(problem: &RegressionProblem, xi: &DVector<f64>) -> f64 {
    let mut g = 2.0 * problem.design.tr_mul(&problem.residual(xi));
    for (gj, w) in g.iter_mut().zip(problem.penalty_weights()) {
        if w > 0.0 {
            *gj /= w;
        }
    }
    kkt_violation(&g, xi, problem.mu)
}

pub(crate) fn kkt_violation(g: &DVector<f64>, xi: &DVector<f64>, mu: f64) -> f64 {
    g.iter()
        .zip(xi.iter())
        .map(|(&gj, &x)| if x != 0.0 { (gj + mu * x.signum()).abs() } else { (gj.abs() - mu).max(0.0) })
        .fold(0.0, f64::max)
}

/// Solves `Q_SS x = rhs` for a small symmetric positive definite block.
pub(crate) fn solve_block(q: &DMatrix<f64>, support: &[usize], rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let k = support.len();
    let sub = DMatrix::from_fn(k, k, |a, b| q[(support[a], support[b])]);
    let chol = sub.cholesky()?;
    let x = chol.solve(rhs);
    x.iter().all(|v| v.is_finite()).then_some(x)
}
