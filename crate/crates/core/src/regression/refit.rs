use super::{kkt_check, nonzero_support, RegressionProblem, SparseSolution};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_REL_TOL: f64 = 1e-4;

/// Drops coefficients below `rel_tol * max |xi|` and refits the survivors by
/// unpenalized least squares, repeating until every refitted coefficient
/// clears the threshold. For normalized problems magnitudes are compared in
/// the unit-column basis, `|xi_j| ||A_j||`.
pub fn threshold_and_refit(
    problem: &RegressionProblem,
    solution: &SparseSolution,
    rel_tol: f64,
) -> Result<SparseSolution> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    if solution.xi.amax() == 0.0 {
        return Err(Error::EmptyModel("all coefficients are zero".into()));
    }
    let weights = problem.penalty_weights();
    let size = |xi: &DVector<f64>, j: usize| xi[j].abs() * weights[j];
    let mut xi = solution.xi.clone();
    for _ in 0..=problem.terms() {
        let largest = (0..xi.len()).map(|j| size(&xi, j)).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..xi.len()).filter(|&j| xi[j] != 0.0 && size(&xi, j) >= rel_tol * largest).collect();
        let sub = DMatrix::from_fn(problem.rows(), keep.len(), |i, k| problem.design[(i, keep[k])] / weights[keep[k]]);
        let coef = least_squares(&sub, &problem.target)?;
        let mut next = DVector::zeros(problem.terms());
        for (k, &j) in keep.iter().enumerate() {
            next[j] = coef[k] / weights[j];
        }
        let top = (0..next.len()).map(|j| size(&next, j)).fold(0.0, f64::max);
        let settled = keep.iter().all(|&j| next[j] != 0.0 && size(&next, j) >= rel_tol * top);
        xi = next;
        if settled || keep.is_empty() {
            break;
        }
    }
    let support = nonzero_support(&xi);
    if support.is_empty() {
        return Err(Error::EmptyModel("refit left no nonzero coefficient".into()));
    }
    Ok(SparseSolution {
        support,
        objective: problem.objective(&xi),
        kkt_residual: kkt_check(problem, &xi),
        iterations: solution.iterations,
        method: solution.method,
        effective_mu: solution.effective_mu,
        refit: true,
        warnings: solution.warnings.clone(),
        xi,
    })
}
