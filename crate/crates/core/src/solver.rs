//! Forward solves of learned models by nodal collocation with the discrete
//! operators.

use crate::discovery::{ModelKind, SparseModel};
use crate::error::{Error, Result};
use crate::features::Channel;
use crate::geometry::fmt_f64;
use crate::geometry::PointCloud;
use crate::operators::DiscreteOperators;
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::path::Path;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_NEWTON: usize = 50;

/// A learned model together with the data needed to solve it forward.
///
/// `forcing` holds one column for stationary problems and `steps + 1`
/// columns `f(X, t_j)` for evolution problems.
#[derive(Clone, Debug)]
pub struct ForwardProblem<'a> {
    pub model: &'a SparseModel,
    pub ops: &'a DiscreteOperators,
    pub forcing: DMatrix<f64>,
    pub initial: Option<DVector<f64>>,
    pub dt: f64,
    pub steps: usize,
}

impl<'a> ForwardProblem<'a> {
    /// `M(u) = f`.
    pub fn stationary(model: &'a SparseModel, ops: &'a DiscreteOperators, forcing: &DVector<f64>) -> Result<Self> {
        if model.kind == ModelKind::Evolution || model.kind == ModelKind::Eikonal {
            return Err(Error::invalid(format!("a {} model cannot be solved as a stationary problem", model.kind)));
        }
        check_model(model, ops)?;
        check_finite("forcing", forcing.as_slice(), ops.len(), forcing.len())?;
        Ok(ForwardProblem {
            model,
            ops,
            forcing: DMatrix::from_column_slice(forcing.len(), 1, forcing.as_slice()),
            initial: None,
            dt: 0.0,
            steps: 0,
        })
    }

    /// `du/dt = M(u) - f` from `initial` over `steps` steps of size `dt`.
    pub fn evolution(
        model: &'a SparseModel,
        ops: &'a DiscreteOperators,
        initial: &DVector<f64>,
        dt: f64,
        steps: usize,
        forcing: DMatrix<f64>,
    ) -> Result<Self> {
        if model.kind != ModelKind::Evolution {
            return Err(Error::invalid(format!("a {} model has no time derivative", model.kind)));
        }
        check_model(model, ops)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::invalid("need at least one time step"));
        }
        check_finite("initial state", initial.as_slice(), ops.len(), initial.len())?;
        if forcing.ncols() != steps + 1 {
            return Err(Error::invalid(format!("forcing has {} time levels, expected {}", forcing.ncols(), steps + 1)));
        }
        check_finite("forcing", forcing.as_slice(), ops.len(), forcing.nrows())?;
        Ok(ForwardProblem { model, ops, forcing, initial: Some(initial.clone()), dt, steps })
    }

    /// Evolution problem with `f(x, t)` sampled at the nodes.
    pub fn evolution_with(
        model: &'a SparseModel,
        ops: &'a DiscreteOperators,
        initial: &DVector<f64>,
        dt: f64,
        steps: usize,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let cloud = ops.cloud();
        let forcing = DMatrix::from_fn(cloud.len(), steps + 1, |i, j| f(cloud.node(i), j as f64 * dt));
        Self::evolution(model, ops, initial, dt, steps, forcing)
    }
}

fn check_finite(name: &str, values: &[f64], n: usize, len: usize) -> Result<()> {
    if len != n {
        return Err(Error::invalid(format!("{name} has {len} rows, cloud has {n} nodes")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be finite")));
    }
    Ok(())
}

fn check_model(model: &SparseModel, ops: &DiscreteOperators) -> Result<()> {
    if model.coefficients.len() != model.terms.len() {
        return Err(Error::invalid("model has mismatched terms and coefficients"));
    }
    for c in model.map.components() {
        match c {
            Channel::PLaplacian(_) => {
                return Err(Error::invalid("p-Laplacian models cannot be solved forward"));
            }
            Channel::Grad(k) | Channel::GradLaplacian(k) if *k >= ops.dim() => {
                return Err(Error::invalid(format!("channel {c} needs axis {k} in R^{}", ops.dim())));
            }
            Channel::GradLaplacian(_) | Channel::Bilaplacian => ops.require_fourth_order()?,
            _ => {}
        }
    }
    Ok(())
}

/// `M(u) = sum_j xi_j prod_c (C_c u)^alpha_jc` with each channel a linear map
/// `C_c` (`None` for the identity).
struct ModelOperator {
    channels: Vec<Option<DMatrix<f64>>>,
    terms: Vec<(Vec<u32>, f64)>,
}

impl ModelOperator {
    fn new(model: &SparseModel, ops: &DiscreteOperators, keep: impl Fn(usize) -> bool) -> ModelOperator {
        let lap = || ops.laplacian_nodal().clone();
        let channels = model
            .map
            .components()
            .iter()
            .map(|c| match c {
                Channel::U => None,
                Channel::Grad(k) => Some(ops.grad_nodal_mats()[*k].clone()),
                Channel::Laplacian => Some(lap()),
                Channel::GradLaplacian(k) => Some(&ops.grad_nodal_mats()[*k] * ops.laplacian_nodal()),
                Channel::Bilaplacian => Some(ops.laplacian_nodal() * ops.laplacian_nodal()),
                Channel::PLaplacian(_) => unreachable!("rejected by check_model"),
            })
            .collect();
        let terms = (0..model.terms.len())
            .filter(|&j| model.coefficients[j] != 0.0 && keep(j))
            .map(|j| (model.terms[j].multi_index.clone(), model.coefficients[j]))
            .collect();
        ModelOperator { channels, terms }
    }

    fn dim(&self) -> usize {
        self.channels.len()
    }

    fn channel_values(&self, u: &DVector<f64>) -> Vec<DVector<f64>> {
        self.channels
            .iter()
            .map(|c| match c {
                None => u.clone(),
                Some(m) => m * u,
            })
            .collect()
    }

    fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let ch = self.channel_values(u);
        let mut out = DVector::zeros(u.len());
        for (alpha, xi) in &self.terms {
            for i in 0..u.len() {
                let mono: f64 = alpha.iter().zip(&ch).map(|(&a, c)| c[i].powi(a as i32)).product();
                out[i] += xi * mono;
            }
        }
        out
    }

    /// `sum_c diag(dM/dch_c) C_c`.
    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = u.len();
        let ch = self.channel_values(u);
        let mut weights = vec![DVector::<f64>::zeros(n); self.dim()];
        for (alpha, xi) in &self.terms {
            for (c, &ac) in alpha.iter().enumerate() {
                if ac == 0 {
                    continue;
                }
                for i in 0..n {
                    let rest: f64 = alpha
                        .iter()
                        .zip(&ch)
                        .enumerate()
                        .filter(|(k, _)| *k != c)
                        .map(|(_, (&a, v))| v[i].powi(a as i32))
                        .product();
                    weights[c][i] += xi * ac as f64 * ch[c][i].powi(ac as i32 - 1) * rest;
                }
            }
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for (w, c) in weights.iter().zip(&self.channels) {
            match c {
                None => {
                    for i in 0..n {
                        jac[(i, i)] += w[i];
                    }
                }
                Some(m) => {
                    for j in 0..n {
                        for i in 0..n {
                            jac[(i, j)] += w[i] * m[(i, j)];
                        }
                    }
                }
            }
        }
        jac
    }

    fn is_linear(&self) -> bool {
        self.terms.iter().all(|(a, _)| a.iter().sum::<u32>() <= 1)
    }
}

fn lu_solve(matrix: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let x = matrix.lu().solve(rhs).ok_or(Error::IllConditioned { condition_estimate: f64::INFINITY, jitter: 0.0 })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { condition_estimate: f64::INFINITY, jitter: 0.0 });
    }
    Ok(x)
}

/// Solves `M(u) = f` at the nodes, returning `u` with
/// `||M(u) - f||_inf <= tol * max(1, ||f||_inf)`.
///
/// Linear models are solved directly (with a few refinement steps); others
/// by Newton's method started from the solution of the degree-one truncation.
pub fn solve_stationary(problem: &ForwardProblem<'_>, tol: f64, max_newton: usize) -> Result<DVector<f64>> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let model = problem.model;
    let f = problem.forcing.column(0).into_owned();
    let threshold = tol * f.amax().max(1.0);
    let full = ModelOperator::new(model, problem.ops, |_| true);
    if full.terms.is_empty() {
        return Err(Error::EmptyModel("model has no nonzero terms".into()));
    }
    let linear = ModelOperator::new(model, problem.ops, |j| model.terms[j].degree() <= 1);
    let zero = DVector::zeros(f.len());
    let constant = linear.apply(&zero);
    let guess = if linear.terms.iter().any(|(a, _)| a.iter().sum::<u32>() == 1) {
        lu_solve(linear.jacobian(&zero), &(&f - &constant)).ok()
    } else {
        None
    };
    let mut u = guess.unwrap_or(zero);
    let limit = if full.is_linear() { 3 } else { max_newton };
    let mut residual = full.apply(&u) - &f;
    let mut iterations = 0;
    while residual.amax() > threshold {
        if iterations == limit {
            return Err(Error::NonConvergence { iterations, residual: residual.amax() });
        }
        iterations += 1;
        let step = lu_solve(full.jacobian(&u), &residual)?;
        u -= step;
        residual = full.apply(&u) - &f;
        if residual.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence { iterations, residual: f64::INFINITY });
        }
    }
    Ok(u)
}

/// Nodal solution trajectory, column `j` at `t_j = j dt`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub values: DMatrix<f64>,
    /// Number of matrix factorizations performed.
    pub factorizations: usize,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn state(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }
}

/// `c I - a L`, factorized once; diagonal when `a = 0`.
struct ImplicitSystem {
    diagonal: f64,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ImplicitSystem {
    fn new(ops: &DiscreteOperators, c: f64, a: f64, counter: &mut usize) -> ImplicitSystem {
        if a == 0.0 {
            return ImplicitSystem { diagonal: c, lu: None };
        }
        let n = ops.len();
        let matrix = DMatrix::identity(n, n) * c - ops.laplacian_nodal() * a;
        *counter += 1;
        ImplicitSystem { diagonal: c, lu: Some(matrix.lu()) }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let x = match &self.lu {
            None => rhs / self.diagonal,
            Some(lu) => {
                lu.solve(rhs).ok_or(Error::IllConditioned { condition_estimate: f64::INFINITY, jitter: 0.0 })?
            }
        };
        Ok(x)
    }
}

/// SBDF2 time stepping with the pure `Delta_S u` term implicit and every
/// other term extrapolated; the first step is semi-implicit Euler.
pub fn solve_evolution(problem: &ForwardProblem<'_>) -> Result<Trajectory> {
    let model = problem.model;
    let u0 = problem.initial.as_ref().ok_or_else(|| Error::invalid("evolution problem needs an initial state"))?;
    let lap_term = model
        .terms
        .iter()
        .position(|t| t.linear_channel().is_some_and(|c| model.map.components()[c] == Channel::Laplacian));
    let a = lap_term.map_or(0.0, |j| model.coefficients[j]);
    let explicit = ModelOperator::new(model, problem.ops, |j| Some(j) != lap_term);
    let (dt, steps, n) = (problem.dt, problem.steps, problem.ops.len());
    let f = &problem.forcing;

    let mut factorizations = 0;
    let mut values = DMatrix::<f64>::zeros(n, steps + 1);
    values.set_column(0, u0);

    let euler = ImplicitSystem::new(problem.ops, 1.0 / dt, a, &mut factorizations);
    let rhs = u0 / dt + explicit.apply(u0) - f.column(0);
    let u1 = euler.solve(&rhs)?;
    if u1.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp(1));
    }
    values.set_column(1, &u1);
    drop(euler);

    if steps >= 2 {
        let bdf = ImplicitSystem::new(problem.ops, 1.5 / dt, a, &mut factorizations);
        for j in 1..steps {
            let (cur, prev) = (values.column(j).into_owned(), values.column(j - 1).into_owned());
            let extrapolated = 2.0 * &cur - &prev;
            let rhs = (4.0 * &cur - &prev) / (2.0 * dt) + explicit.apply(&extrapolated)
                - (2.0 * f.column(j) - f.column(j - 1));
            let next = bdf.solve(&rhs)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp(j + 1));
            }
            values.set_column(j + 1, &next);
        }
    }
    Ok(Trajectory { dt, values, factorizations })
}

/// `||predicted - reference||_2 / ||reference||_2`.
pub fn relative_l2(predicted: &DVector<f64>, reference: &DVector<f64>) -> Result<f64> {
    if predicted.len() != reference.len() {
        return Err(Error::invalid(format!("lengths differ: {} vs {}", predicted.len(), reference.len())));
    }
    let norm = reference.norm();
    if norm == 0.0 {
        return Err(Error::invalid("reference has zero norm"));
    }
    Ok((predicted - reference).norm() / norm)
}

/// CSV with header `t,node_index,x,y[,z],u`, one row per time level and node.
pub fn format_trajectory(cloud: &PointCloud, trajectory: &Trajectory) -> Result<String> {
    if trajectory.values.nrows() != cloud.len() {
        return Err(Error::invalid("trajectory and cloud have different node counts"));
    }
    let axes = ["x", "y", "z"];
    let mut out = format!("t,node_index,{},u\n", axes[..cloud.dim()].join(","));
    for j in 0..=trajectory.steps() {
        let t = fmt_f64(trajectory.time(j));
        for i in 0..cloud.len() {
            let x: Vec<String> = cloud.node(i).iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{t},{i},{},{}", x.join(","), fmt_f64(trajectory.values[(i, j)]));
        }
    }
    Ok(out)
}

pub fn write_trajectory(path: impl AsRef<Path>, cloud: &PointCloud, trajectory: &Trajectory) -> Result<()> {
    std::fs::write(path, format_trajectory(cloud, trajectory)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{discover_stationary_with, RegressionSettings};
    use crate::features::FeatureMap;
    use crate::geometry::{circle_nodes, sphere_nodes};
    use crate::kernels::KernelSpec;
    use crate::operators::{build_operators, laplace_beltrami_nodal};
    use std::time::Instant;

    fn circle_ops(n: usize) -> DiscreteOperators {
        build_operators(&circle_nodes(n).unwrap(), &KernelSpec::matern(2, 1, 6.0).unwrap()).unwrap()
    }

    fn model(ops: &DiscreteOperators, kind: ModelKind, ell: u32, coefs: &[(&str, f64)]) -> SparseModel {
        SparseModel::with_coefficients(kind, FeatureMap::standard(ops.dim()), ell, *ops.kernel(), coefs).unwrap()
    }

    #[test]
    fn identity_model_returns_forcing() {
        let ops = circle_ops(10);
        let m = model(&ops, ModelKind::Stationary, 2, &[("u", 1.0)]);
        let f = DVector::from_fn(10, |i, _| (i as f64).sin());
        let u = solve_stationary(&ForwardProblem::stationary(&m, &ops, &f).unwrap(), 1e-12, 5).unwrap();
        assert_eq!(u, f);
    }

    #[test]
    fn relative_l2_examples() {
        let r = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(relative_l2(&r, &r).unwrap(), 0.0);
        assert_eq!(relative_l2(&(2.0 * &r), &r).unwrap(), 1.0);
        let mut p = r.clone();
        p[0] += 1e-3;
        assert!((relative_l2(&p, &r).unwrap() - 1e-3 / 5.0).abs() < 1e-15);
        assert!(relative_l2(&r, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn discover_then_solve_round_trip() {
        let cloud = sphere_nodes(300).unwrap();
        let ops = build_operators(&cloud, &KernelSpec::matern(3, 1, 4.0).unwrap()).unwrap();
        let u =
            DVector::from_iterator(300, cloud.nodes().map(|x| 10.0 * x[0] * x[1] * x[2] + 5.0 * x[0] * x[1] + x[2]));
        let f = -laplace_beltrami_nodal(&ops, &u).unwrap() + &u;
        let m = discover_stationary_with(&ops, &u, &f, 2, &RegressionSettings::lasso(0.0), Instant::now()).unwrap();
        assert!((m.coefficient("Δ_S u") + 1.0).abs() < 1e-8);
        let problem = ForwardProblem::stationary(&m, &ops, &f).unwrap();
        let solved = solve_stationary(&problem, DEFAULT_TOL, DEFAULT_MAX_NEWTON).unwrap();
        assert!(relative_l2(&solved, &u).unwrap() < 1e-6);
    }

    #[test]
    fn newton_solves_quadratic_model() {
        let cloud = sphere_nodes(200).unwrap();
        let ops = build_operators(&cloud, &KernelSpec::matern(3, 1, 4.0).unwrap()).unwrap();
        let u = DVector::from_iterator(200, cloud.nodes().map(|x| 0.5 * x[2] + 0.2 * x[0] * x[1]));
        let m = model(&ops, ModelKind::Stationary, 2, &[("Δ_S u", -1.0), ("u", 2.0), ("u²", 1.0)]);
        let f = -laplace_beltrami_nodal(&ops, &u).unwrap() + 2.0 * &u + u.component_mul(&u);
        let problem = ForwardProblem::stationary(&m, &ops, &f).unwrap();
        let solved = solve_stationary(&problem, 1e-10, 20).unwrap();
        let residual = ModelOperator::new(&m, &ops, |_| true).apply(&solved) - &f;
        assert!(residual.amax() <= 1e-10 * f.amax().max(1.0));
        assert!(relative_l2(&solved, &u).unwrap() < 1e-8);
    }

    #[test]
    fn sbdf2_is_second_order() {
        let ops = circle_ops(8);
        let m = model(&ops, ModelKind::Evolution, 1, &[("u", -1.0)]);
        let u0 = DVector::from_element(8, 1.0);
        let errors: Vec<f64> = [0.02f64, 0.01, 0.005]
            .iter()
            .map(|&dt| {
                let steps = (1.0 / dt).round() as usize;
                let p = ForwardProblem::evolution(&m, &ops, &u0, dt, steps, DMatrix::zeros(8, steps + 1)).unwrap();
                let traj = solve_evolution(&p).unwrap();
                assert_eq!(traj.factorizations, 0);
                (traj.state(steps)[3] - (-1.0f64).exp()).abs()
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() <= 0.2, "{errors:?}");
        }
    }

    #[test]
    fn heat_equation_reuses_factorization() {
        let ops = circle_ops(40);
        let m = model(&ops, ModelKind::Evolution, 1, &[("Δ_S u", 1.0)]);
        let exact = |x: &[f64], t: f64| (-t).exp() * x[0] + (-4.0 * t).exp() * x[0] * x[1];
        let cloud = ops.cloud().clone();
        let u0 = DVector::from_iterator(40, cloud.nodes().map(|x| exact(x, 0.0)));
        let p = ForwardProblem::evolution_with(&m, &ops, &u0, 0.01, 50, |_, _| 0.0).unwrap();
        let traj = solve_evolution(&p).unwrap();
        assert_eq!(traj.factorizations, 2);
        let reference = DVector::from_iterator(40, cloud.nodes().map(|x| exact(x, 0.5)));
        assert!(relative_l2(&traj.state(50), &reference).unwrap() < 1e-3);
        let one = ForwardProblem::evolution_with(&m, &ops, &u0, 0.01, 1, |_, _| 0.0).unwrap();
        assert_eq!(solve_evolution(&one).unwrap().factorizations, 1);
    }

    #[test]
    fn zero_state_stays_zero() {
        let ops = circle_ops(12);
        let m = model(&ops, ModelKind::Evolution, 2, &[("Δ_S u", 0.5), ("u²", 0.125), ("u·[∇_S u]_1", 2.0)]);
        let p = ForwardProblem::evolution_with(&m, &ops, &DVector::zeros(12), 0.1, 10, |_, _| 0.0).unwrap();
        assert!(solve_evolution(&p).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn blow_up_names_the_step() {
        let ops = circle_ops(6);
        let m = model(&ops, ModelKind::Evolution, 2, &[("u²", 1.0)]);
        let u0 = DVector::from_element(6, 10.0);
        let p = ForwardProblem::evolution_with(&m, &ops, &u0, 0.5, 40, |_, _| 0.0).unwrap();
        assert!(matches!(solve_evolution(&p), Err(Error::BlowUp(j)) if j > 1));
    }

    #[test]
    fn trajectory_csv_layout() {
        let ops = circle_ops(4);
        let traj = Trajectory { dt: 0.5, values: DMatrix::from_element(4, 3, 1.0), factorizations: 0 };
        let text = format_trajectory(ops.cloud(), &traj).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,node_index,x,y,u");
        assert_eq!(lines.len(), 1 + 12);
        assert!(lines[5].starts_with("5.0000000000000000e-1,0,"));
    }

    #[test]
    fn rejects_unsolvable_models() {
        let ops = circle_ops(6);
        let m = SparseModel::with_coefficients(
            ModelKind::Eikonal,
            FeatureMap::eikonal(&[2.0, 5.0]).unwrap(),
            1,
            *ops.kernel(),
            &[("u", 1.0)],
        )
        .unwrap();
        assert!(ForwardProblem::stationary(&m, &ops, &DVector::zeros(6)).is_err());
        let evo = model(&ops, ModelKind::Evolution, 1, &[("u", 1.0)]);
        assert!(ForwardProblem::stationary(&evo, &ops, &DVector::zeros(6)).is_err());
    }
}
