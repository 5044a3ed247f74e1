use super::lasso::problem_scales;
use super::{kkt_check, kkt_violation, nonzero_support, solve_block, Method, RegressionProblem, SparseSolution};
use crate::error::{Error, Result};
use nalgebra::{DVector, SymmetricEigen};

/// Largest problem the oracle accepts.
pub const QP_MAX_TERMS: usize = 64;

const MAX_ITERATIONS: usize = 200_000;

/// Projection of `(a, g)` onto the cone `|a| <= g`.
fn project_cone(a: f64, g: f64) -> (f64, f64) {
    if a.abs() <= g {
        (a, g)
    } else if g <= -a.abs() {
        (0.0, 0.0)
    } else {
        let s = 0.5 * (a.abs() + g);
        (s * a.signum(), s)
    }
}

/// Solves the constrained form
/// `min ||A xi - b||^2 + mu sum gamma  s.t. -gamma <= xi <= gamma`
/// by accelerated projected gradient on `(xi, gamma)` with adaptive restart,
/// then solves exactly on the detected sign pattern when that is consistent.
/// Meant only for cross-checking [`super::lasso`] on small problems.
pub fn lasso_qp_oracle(problem: &RegressionProblem, tol: f64) -> Result<SparseSolution> {
    let n = problem.terms();
    if n > QP_MAX_TERMS {
        return Err(Error::OracleScaleExceeded { n, max: QP_MAX_TERMS });
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let scales = problem_scales(problem)?;
    let mut a = problem.design.clone();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).unscale_mut(*s);
    }
    let q = a.tr_mul(&a);
    let c = a.tr_mul(&problem.target);
    let mu = problem.mu;
    let lipschitz = 2.0 * SymmetricEigen::new(q.clone()).eigenvalues.amax();

    let smooth = |x: &DVector<f64>, g: &DVector<f64>| x.dot(&(&q * x)) - 2.0 * c.dot(x) + mu * g.sum();
    let mut x = DVector::<f64>::zeros(n);
    let mut g = DVector::<f64>::zeros(n);
    let mut iterations = 0;
    if lipschitz > 0.0 {
        let (mut yx, mut yg) = (x.clone(), g.clone());
        let mut t = 1.0f64;
        let mut f_prev = smooth(&x, &g);
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let grad = 2.0 * (&q * &yx - &c);
            let mut nx = DVector::zeros(n);
            let mut ng = DVector::zeros(n);
            for j in 0..n {
                let (a, b) = project_cone(yx[j] - grad[j] / lipschitz, yg[j] - mu / lipschitz);
                nx[j] = a;
                ng[j] = b;
            }
            let f = smooth(&nx, &ng);
            let change = (&nx - &x).amax().max((&ng - &g).amax());
            if f > f_prev {
                // restart the momentum
                t = 1.0;
                yx = x.clone();
                yg = g.clone();
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            yx = &nx + beta * (&nx - &x);
            yg = &ng + beta * (&ng - &g);
            x = nx;
            g = ng;
            t = t_next;
            f_prev = f;
            if change <= 1e-3 * tol * x.amax().max(1.0) {
                break;
            }
        }
    }

    // exact solve on the sign pattern of the iterate
    let cutoff = 1e-9 * x.amax().max(1.0);
    let mut signed = x.map(|v| if v.abs() > cutoff { v } else { 0.0 });
    let support = nonzero_support(&signed);
    let kkt_of = |v: &DVector<f64>| kkt_violation(&(2.0 * (&q * v - &c)), v, mu);
    if !support.is_empty() {
        let rhs = DVector::from_iterator(support.len(), support.iter().map(|&j| c[j] - 0.5 * mu * signed[j].signum()));
        if let Some(sol) = solve_block(&q, &support, &rhs) {
            let consistent =
                support.iter().enumerate().all(|(k, &j)| sol[k] != 0.0 && sol[k].signum() == signed[j].signum());
            if consistent {
                let mut candidate = DVector::zeros(n);
                for (k, &j) in support.iter().enumerate() {
                    candidate[j] = sol[k];
                }
                if kkt_of(&candidate) <= kkt_of(&signed) {
                    signed = candidate;
                }
            }
        }
    }
    let xi = DVector::from_iterator(n, signed.iter().zip(&scales).map(|(v, s)| v / s));
    Ok(SparseSolution {
        support: nonzero_support(&xi),
        objective: problem.objective(&xi),
        kkt_residual: kkt_check(problem, &xi),
        iterations,
        method: Method::Qp,
        effective_mu: mu,
        refit: false,
        warnings: Vec::new(),
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{lasso, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
    use super::*;
    use crate::linalg::least_squares;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cone_projection_cases() {
        assert_eq!(project_cone(0.5, 1.0), (0.5, 1.0));
        assert_eq!(project_cone(1.0, -2.0), (0.0, 0.0));
        assert_eq!(project_cone(-3.0, 1.0), (-2.0, 2.0));
    }

    #[test]
    fn agrees_with_coordinate_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..25 {
            let m = rng.random_range(5..=40);
            let n = rng.random_range(1..=12);
            let mu = [0.0, 0.1, 1.0, 10.0][trial % 4];
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
            let p = RegressionProblem::new(a, b, mu).unwrap();
            let cd = lasso(&p, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
            let qp = lasso_qp_oracle(&p, DEFAULT_TOL).unwrap();
            assert!(
                (cd.objective - qp.objective).abs() <= 1e-6,
                "trial {trial} (m={m}, n={n}, mu={mu}): {} vs {}",
                cd.objective,
                qp.objective
            );
            assert!(qp.kkt_residual <= 10.0 * DEFAULT_TOL || m < n, "trial {trial}: kkt {}", qp.kkt_residual);
        }
    }

    #[test]
    fn zero_penalty_and_scalar_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(20, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let qp = lasso_qp_oracle(&RegressionProblem::new(a.clone(), b.clone(), 0.0).unwrap(), 1e-10).unwrap();
        let ls = least_squares(&a, &b).unwrap();
        assert!((&qp.xi - &ls).amax() < 1e-9);

        // scalar: min (a x - b)^2 + mu |x| = soft(a b, mu / 2) / a^2
        let (av, bv, mu) = (1.7, 2.3, 1.1);
        let p = RegressionProblem::new(DMatrix::from_element(1, 1, av), DVector::from_element(1, bv), mu).unwrap();
        let want = (av * bv - mu / 2.0) / (av * av);
        assert!((lasso_qp_oracle(&p, 1e-12).unwrap().xi[0] - want).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_problems() {
        let p = RegressionProblem::new(DMatrix::zeros(3, 65), DVector::zeros(3), 1.0).unwrap();
        assert!(matches!(lasso_qp_oracle(&p, 1e-8), Err(Error::OracleScaleExceeded { n: 65, max: 64 })));
    }
}
