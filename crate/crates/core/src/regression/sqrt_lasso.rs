use super::{lasso, Method, RegressionProblem, SparseSolution, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

pub const SQRT_LASSO_MAX_OUTER: usize = 100;

/// Recommended penalty `(1.1 / sqrt(M)) Q(1 - 0.05 / (2n))` for
/// `||A xi - b||_2 + mu ||xi||_1` with unit-norm design columns.
pub fn belloni_penalty(rows: usize, terms: usize) -> f64 {
    let normal = Normal::standard();
    1.1 / (rows as f64).sqrt() * normal.inverse_cdf(1.0 - 0.05 / (2.0 * terms as f64))
}

/// Minimizes `||A xi - b||_2 + mu ||xi||_1` by alternating the noise scale
/// `sigma = ||A xi - b|| / sqrt(M)` with a LASSO solve at penalty
/// `2 mu sigma sqrt(M)`, until `sigma` changes by at most `tol` relative.
/// Once two iterates exist, the scale update takes a secant step on
/// `h(sigma) = ||r(sigma)|| / sqrt(M) - sigma`; the plain update contracts
/// only by about `mu^2` per iteration when `mu` is close to 1.
pub fn sqrt_lasso(problem: &RegressionProblem, tol: f64) -> Result<SparseSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let root_m = (problem.rows() as f64).sqrt();
    let b_norm = problem.target.norm();
    let exact = |r: f64| r <= 1e-14 * b_norm || r == 0.0;
    if exact(b_norm) {
        return Err(Error::ExactFit);
    }
    let mut sigma = b_norm / root_m;
    let mut previous: Option<(f64, f64)> = None;
    let mut outer = 0;
    loop {
        outer += 1;
        let mu_eff = 2.0 * problem.mu * sigma * root_m;
        let inner = RegressionProblem { mu: mu_eff, ..problem.clone() };
        let mut sol = lasso(&inner, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
        let r = problem.residual(&sol.xi).norm();
        if exact(r) {
            return Err(Error::ExactFit);
        }
        let next = r / root_m;
        let h = next - sigma;
        let settled = h.abs() <= tol * sigma;
        if settled || outer == SQRT_LASSO_MAX_OUTER {
            if !settled {
                sol.warnings.push(format!("noise scale not settled after {outer} outer iterations"));
            }
            let penalty: f64 = problem.penalty_weights().iter().zip(sol.xi.iter()).map(|(w, v)| w * v.abs()).sum();
            sol.objective = r + problem.mu * penalty;
            sol.method = Method::SqrtLasso;
            sol.effective_mu = mu_eff;
            sol.iterations = outer;
            return Ok(sol);
        }
        let secant = previous.and_then(|(s0, h0)| {
            let s = sigma - h * (sigma - s0) / (h - h0);
            (s.is_finite() && s > 0.0).then_some(s)
        });
        previous = Some((sigma, h));
        sigma = secant.unwrap_or(next);
    }
}
