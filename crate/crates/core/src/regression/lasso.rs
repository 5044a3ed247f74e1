use super::{kkt_check, kkt_violation, nonzero_support, solve_block, Method, RegressionProblem, SparseSolution};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Cyclic coordinate descent on `||A xi - b||^2 + mu ||xi||_1`, starting
/// from zero and sweeping coordinates in index order.
///
/// Works on the Gram form `Q = A^T A`, `c = A^T b`. Stops once a sweep moves
/// no coordinate by more than `tol` and the KKT violation is at most
/// `10 tol`; when the support repeats between sweeps, the exact solution for
/// that sign pattern is tried and kept if it is better. After a rejected try
/// the wait before the next one doubles.
pub fn lasso(problem: &RegressionProblem, tol: f64, max_sweeps: usize) -> Result<SparseSolution> {
    if !(tol > 0.0) || max_sweeps == 0 {
        return Err(Error::invalid("lasso needs tol > 0 and max_sweeps >= 1"));
    }
    let scales = problem_scales(problem)?;
    let a = &problem.design;
    let mut q = a.tr_mul(a);
    let mut c = a.tr_mul(&problem.target);
    for j in 0..q.ncols() {
        c[j] /= scales[j];
        for i in 0..q.nrows() {
            q[(i, j)] /= scales[i] * scales[j];
        }
    }
    let bb = problem.target.norm_squared();
    let run = coordinate_descent(&q, &c, bb, problem.mu, tol, max_sweeps);
    let xi = DVector::from_iterator(run.xi.len(), run.xi.iter().zip(&scales).map(|(v, s)| v / s));
    Ok(SparseSolution {
        support: nonzero_support(&xi),
        objective: problem.objective(&xi),
        kkt_residual: kkt_check(problem, &xi),
        iterations: run.sweeps,
        method: Method::LassoCd,
        effective_mu: problem.mu,
        refit: false,
        warnings: run.warnings,
        xi,
    })
}

/// Column scales of the solving basis: the column norms when normalizing,
/// ones otherwise.
pub(super) fn problem_scales(problem: &RegressionProblem) -> Result<Vec<f64>> {
    if !problem.normalize_columns {
        return Ok(vec![1.0; problem.terms()]);
    }
    let norms = problem.column_norms();
    if let Some(j) = norms.iter().position(|&s| s == 0.0) {
        return Err(Error::invalid(format!("column {j} is zero and cannot be normalized")));
    }
    Ok(norms)
}

pub(super) struct CdRun {
    pub xi: DVector<f64>,
    pub sweeps: usize,
    pub warnings: Vec<String>,
}

pub(super) fn coordinate_descent(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    bb: f64,
    mu: f64,
    tol: f64,
    max_sweeps: usize,
) -> CdRun {
    let n = c.len();
    let mut xi = DVector::<f64>::zeros(n);
    let mut qx = DVector::<f64>::zeros(n);
    let mut warnings = Vec::new();
    for j in 0..n {
        if q[(j, j)] <= 0.0 && mu == 0.0 {
            warnings.push(format!("rank deficiency: column {j} is zero"));
        }
    }
    let objective = |xi: &DVector<f64>, qx: &DVector<f64>| bb - 2.0 * c.dot(xi) + xi.dot(qx) + mu * xi.lp_norm(1);
    let mut prev_objective = bb;
    let mut prev_support: Option<Vec<usize>> = None;
    let mut increase_reported = false;
    let mut polish_wait = 1usize;
    let mut next_polish = 0usize;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..n {
            let qjj = q[(j, j)];
            if qjj <= 0.0 {
                continue;
            }
            let rho = c[j] - qx[j] + qjj * xi[j];
            let new = soft_threshold(rho, 0.5 * mu) / qjj;
            let delta = new - xi[j];
            if delta != 0.0 {
                qx.axpy(delta, &q.column(j), 1.0);
                xi[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        qx = q * &xi;
        let obj = objective(&xi, &qx);
        if obj > prev_objective + 1e-12 * bb.max(1.0) && !increase_reported {
            warnings.push(format!("objective increased at sweep {sweeps}: {prev_objective:e} -> {obj:e}"));
            increase_reported = true;
        }
        prev_objective = obj;
        let mut kkt = kkt_violation(&(2.0 * (&qx - c)), &xi, mu);
        if max_change <= tol && kkt <= 10.0 * tol {
            break;
        }
        let support = nonzero_support(&xi);
        if !support.is_empty() && prev_support.as_ref() == Some(&support) && sweeps >= next_polish {
            let mut accepted = false;
            if let Some(candidate) = polish(q, c, mu, &xi, &support) {
                let cand_qx = q * &candidate;
                let cand_kkt = kkt_violation(&(2.0 * (&cand_qx - c)), &candidate, mu);
                let cand_obj = objective(&candidate, &cand_qx);
                if cand_kkt < kkt && cand_obj <= obj + 1e-12 * bb.max(1.0) {
                    xi = candidate;
                    qx = cand_qx;
                    kkt = cand_kkt;
                    prev_objective = cand_obj;
                    accepted = true;
                    if kkt <= 10.0 * tol {
                        break;
                    }
                }
            }
            polish_wait = if accepted { 1 } else { (2 * polish_wait).min(max_sweeps) };
            next_polish = sweeps + polish_wait;
        }
        prev_support = Some(support);
        if max_change <= 4.0 * f64::EPSILON * xi.amax() {
            // floating-point fixed point: further sweeps cannot move
            break;
        }
    }
    if sweeps == max_sweeps {
        warnings.push(format!("coordinate descent stopped after the maximum {max_sweeps} sweeps"));
    }
    CdRun { xi, sweeps, warnings }
}

/// Exact minimizer for the sign pattern of `xi` on `support`, if it keeps
/// those signs.
fn polish(q: &DMatrix<f64>, c: &DVector<f64>, mu: f64, xi: &DVector<f64>, support: &[usize]) -> Option<DVector<f64>> {
    let rhs = DVector::from_iterator(support.len(), support.iter().map(|&j| c[j] - 0.5 * mu * xi[j].signum()));
    let x = solve_block(q, support, &rhs)?;
    let mut out = DVector::zeros(xi.len());
    for (k, &j) in support.iter().enumerate() {
        if x[k] == 0.0 || x[k].signum() != xi[j].signum() {
            return None;
        }
        out[j] = x[k];
    }
    Some(out)
}
