//! End-to-end identification pipelines.

mod model;
mod model_io;
mod snapshots;

pub use model::{Diagnostics, ModelKind, RegressionSummary, SourceTerm, SparseModel};
pub use model_io::{format_model, parse_model, read_model, write_model};
pub use snapshots::Snapshots;

use crate::error::{Error, Result};
use crate::features::{
    assemble_library, eikonal_library, enumerate_terms, evaluate_channels, FeatureMap, FeatureTerm, Sbdf2Channels,
};
use crate::geometry::PointCloud;
use crate::kernels::KernelSpec;
use crate::operators::{build_operators, interpolate, DiscreteOperators};
use crate::regression::{
    belloni_penalty, lasso, sqrt_lasso, threshold_and_refit, RegressionProblem, SparseSolution, DEFAULT_MAX_SWEEPS,
    DEFAULT_REL_TOL, DEFAULT_TOL,
};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegressionMethod {
    Lasso,
    SqrtLasso,
}

/// How the coefficient vector is estimated and pruned.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSettings {
    pub method: RegressionMethod,
    /// `None` means 0 for the LASSO and the recommended penalty (on unit-norm
    /// columns) for the square-root LASSO.
    pub mu: Option<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub normalize_columns: bool,
}

impl Default for RegressionSettings {
    fn default() -> Self {
        RegressionSettings {
            method: RegressionMethod::Lasso,
            mu: None,
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            rel_tol: DEFAULT_REL_TOL,
            normalize_columns: true,
        }
    }
}

impl RegressionSettings {
    pub fn lasso(mu: f64) -> Self {
        RegressionSettings { mu: Some(mu), ..Default::default() }
    }

    pub fn sqrt_lasso(mu: Option<f64>) -> Self {
        RegressionSettings { method: RegressionMethod::SqrtLasso, mu, ..Default::default() }
    }

    /// Sparse solve followed by pruning and least-squares refit.
    fn fit(&self, design: DMatrix<f64>, target: DVector<f64>) -> Result<(SparseSolution, RegressionSummary)> {
        let (mu, normalize) = match (self.method, self.mu) {
            (_, Some(mu)) => (mu, self.normalize_columns),
            (RegressionMethod::Lasso, None) => (0.0, self.normalize_columns),
            (RegressionMethod::SqrtLasso, None) => (belloni_penalty(design.nrows(), design.ncols()), true),
        };
        let problem = RegressionProblem::new(design, target, mu)?.normalized(normalize);
        let raw = match self.method {
            RegressionMethod::Lasso => lasso(&problem, self.tol, self.max_sweeps)?,
            RegressionMethod::SqrtLasso => sqrt_lasso(&problem, 1e-8)?,
        };
        let solution = threshold_and_refit(&problem, &raw, self.rel_tol)?;
        let summary = RegressionSummary {
            method: solution.method,
            mu,
            effective_mu: solution.effective_mu,
            tol: self.tol,
            rel_tol: self.rel_tol,
            normalize_columns: normalize,
        };
        Ok((solution, summary))
    }
}

fn check_samples(name: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::invalid(format!("{name} has {} entries, cloud has {n} nodes", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{name} must be finite")));
    }
    Ok(())
}

fn relative_residual(residual: f64, samples: &DVector<f64>) -> f64 {
    let scale = samples.amax();
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    kind: ModelKind,
    map: FeatureMap,
    ell: u32,
    terms: Vec<FeatureTerm>,
    ops: &DiscreteOperators,
    solution: SparseSolution,
    regression: RegressionSummary,
    rows: usize,
    interpolation_residual: f64,
    started: Instant,
) -> SparseModel {
    SparseModel {
        kind,
        map,
        ell,
        terms,
        coefficients: solution.xi,
        kernel: *ops.kernel(),
        regression,
        diagnostics: Diagnostics {
            rows,
            kkt_residual: solution.kkt_residual,
            jitter: ops.jitter(),
            condition_estimate: ops.condition_estimate(),
            interpolation_residual,
            iterations: solution.iterations,
            runtime_seconds: started.elapsed().as_secs_f64(),
            source_fit_ratio: None,
            warnings: solution.warnings,
        },
        sources: Vec::new(),
        source_kernel: None,
    }
}

/// Identifies `Lambda(u) xi = f` from samples of `u` and `f`.
pub fn discover_stationary(
    cloud: &PointCloud,
    samples: &DVector<f64>,
    forcing: &DVector<f64>,
    kernel: &KernelSpec,
    ell: u32,
    settings: &RegressionSettings,
) -> Result<SparseModel> {
    let started = Instant::now();
    let ops = build_operators(cloud, kernel)?;
    discover_stationary_with(&ops, samples, forcing, ell, settings, started)
}

/// [`discover_stationary`] on prebuilt operators.
pub fn discover_stationary_with(
    ops: &DiscreteOperators,
    samples: &DVector<f64>,
    forcing: &DVector<f64>,
    ell: u32,
    settings: &RegressionSettings,
    started: Instant,
) -> Result<SparseModel> {
    check_samples("samples", samples, ops.len())?;
    check_samples("forcing", forcing, ops.len())?;
    let map = FeatureMap::standard(ops.dim());
    library_fit(ModelKind::Stationary, ops, samples, forcing.clone(), map, ell, settings, started)
}

/// Identifies `L(u, grad u, Delta u, grad Delta u, Delta^2 u) = u` over the
/// extended channel map.
pub fn discover_biharmonic(
    cloud: &PointCloud,
    samples: &DVector<f64>,
    kernel: &KernelSpec,
    ell: u32,
    settings: &RegressionSettings,
) -> Result<SparseModel> {
    let started = Instant::now();
    let ops = build_operators(cloud, kernel)?;
    ops.require_fourth_order()?;
    check_samples("samples", samples, ops.len())?;
    let map = FeatureMap::extended(ops.dim());
    library_fit(ModelKind::Biharmonic, &ops, samples, samples.clone(), map, ell, settings, started)
}

#[allow(clippy::too_many_arguments)]
fn library_fit(
    kind: ModelKind,
    ops: &DiscreteOperators,
    samples: &DVector<f64>,
    target: DVector<f64>,
    map: FeatureMap,
    ell: u32,
    settings: &RegressionSettings,
    started: Instant,
) -> Result<SparseModel> {
    if ell == 0 {
        return Err(Error::invalid("library degree must be at least 1"));
    }
    let interp = interpolate(ops, samples)?;
    let channels = evaluate_channels(ops, &interp, &map)?;
    let terms = enumerate_terms(&map, ell);
    let library = assemble_library(&map, &channels, &terms)?;
    if target.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyModel("regression target is identically zero".into()));
    }
    let rows = library.matrix.nrows();
    let (solution, summary) = settings.fit(library.matrix, target)?;
    let residual = relative_residual(interp.residual(), samples);
    Ok(finish(kind, map, ell, terms, ops, solution, summary, rows, residual, started))
}

/// Identifies `du/dt = Lambda(u) xi - f` from equally spaced snapshots with
/// the SBDF2 loss over `j = 1..M-1`.
pub fn discover_evolution(
    snaps: &Snapshots,
    kernel: &KernelSpec,
    ell: u32,
    settings: &RegressionSettings,
) -> Result<SparseModel> {
    let started = Instant::now();
    if snaps.steps() < 2 {
        return Err(Error::InsufficientSnapshots(snaps.steps() + 1));
    }
    let ops = build_operators(snaps.cloud(), kernel)?;
    discover_evolution_with(&ops, snaps, ell, settings, started)
}

/// [`discover_evolution`] on prebuilt operators.
pub fn discover_evolution_with(
    ops: &DiscreteOperators,
    snaps: &Snapshots,
    ell: u32,
    settings: &RegressionSettings,
    started: Instant,
) -> Result<SparseModel> {
    if snaps.steps() < 2 {
        return Err(Error::InsufficientSnapshots(snaps.steps() + 1));
    }
    if ell == 0 {
        return Err(Error::invalid("library degree must be at least 1"));
    }
    let map = FeatureMap::standard(ops.dim());
    let terms = enumerate_terms(&map, ell);
    let sbdf2 = Sbdf2Channels::new(ops, snaps, &map)?;
    let n = ops.len();
    let blocks = snaps.steps() - 1;
    let mut design = DMatrix::<f64>::zeros(blocks * n, terms.len());
    let mut target = DVector::<f64>::zeros(blocks * n);
    for j in 1..snaps.steps() {
        let (channels, lhs, forcing) = sbdf2.rows(j)?;
        let lib = assemble_library(&map, &channels, &terms)?;
        let at = (j - 1) * n;
        design.rows_mut(at, n).copy_from(&lib.matrix);
        target.rows_mut(at, n).copy_from(&(lhs + forcing));
    }
    let scale = snaps.values().amax() / snaps.dt() + snaps.forcing().amax();
    if target.amax() <= 1e-12 * scale {
        return Err(Error::EmptyModel("time derivative and forcing vanish: nothing to identify".into()));
    }
    let coefficients = ops.coefficients(snaps.values());
    let fitted = ops.gram() * &coefficients;
    let interpolation_residual = (0..=snaps.steps())
        .map(|j| relative_residual((fitted.column(j) - snaps.values().column(j)).amax(), &snaps.snapshot(j)))
        .fold(0.0, f64::max);
    let rows = design.nrows();
    let (solution, summary) = settings.fit(design, target)?;
    Ok(finish(ModelKind::Evolution, map, ell, terms, ops, solution, summary, rows, interpolation_residual, started))
}

/// Settings of the two-step eikonal identification.
#[derive(Clone, Debug, PartialEq)]
pub struct EikonalSettings {
    pub p_values: Vec<f64>,
    /// Penalty of the p-Laplacian library fit.
    pub mu1: f64,
    /// Penalty of the Gaussian source fit.
    pub mu2: f64,
    /// Kernel of the source fit.
    pub source_kernel: KernelSpec,
    /// Coordinate-descent sweep cap of the source fit.
    pub source_max_sweeps: usize,
    pub regression: RegressionSettings,
}

impl EikonalSettings {
    /// `p in {2, 5, 50, 100, 200, ..., 1000}`, penalties `1e-3`, Gaussian
    /// sources with `sigma^2 = 1`.
    pub fn standard(ambient_dim: usize) -> Result<EikonalSettings> {
        let mut p_values = vec![2.0, 5.0, 50.0];
        p_values.extend((1..=10).map(|k| 100.0 * k as f64));
        Ok(EikonalSettings {
            p_values,
            mu1: 1e-3,
            mu2: 1e-3,
            source_kernel: KernelSpec::gaussian(ambient_dim, 1.0)?,
            source_max_sweeps: DEFAULT_MAX_SWEEPS,
            regression: RegressionSettings::default(),
        })
    }
}

/// Two-step eikonal identification: a sparse fit of `[u, Delta^p u]` to the
/// all-ones vector, then a sparse Gaussian expansion of the residual whose
/// active centers are the identified sources.
pub fn discover_eikonal(
    cloud: &PointCloud,
    samples: &DVector<f64>,
    kernel: &KernelSpec,
    settings: &EikonalSettings,
) -> Result<SparseModel> {
    let started = Instant::now();
    let ops = build_operators(cloud, kernel)?;
    discover_eikonal_with(&ops, samples, settings, started)
}

pub fn discover_eikonal_with(
    ops: &DiscreteOperators,
    samples: &DVector<f64>,
    settings: &EikonalSettings,
    started: Instant,
) -> Result<SparseModel> {
    check_samples("samples", samples, ops.len())?;
    if samples.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyModel("eikonal samples vanish identically; distance data is required".into()));
    }
    if settings.source_kernel.ambient_dim != ops.dim() {
        return Err(Error::invalid("source kernel dimension does not match the cloud"));
    }
    let n = ops.len();
    let interp = interpolate(ops, samples)?;
    let library = eikonal_library(ops, &interp, &settings.p_values)?;
    let ones = DVector::from_element(n, 1.0);
    let step1 = RegressionSettings { mu: Some(settings.mu1), ..settings.regression.clone() };
    let (solution, summary) = step1.fit(library.matrix.clone(), ones.clone())?;
    let residual = &library.matrix * &solution.xi - &ones;

    let mut warnings = Vec::new();
    let mut sources = Vec::new();
    let mut source_fit_ratio = None;
    if residual.amax() < 1e-12 {
        warnings.push("model residual vanishes: no source signal".to_string());
    } else {
        let cloud = ops.cloud();
        let psi = DMatrix::from_fn(n, n, |i, j| settings.source_kernel.value(cloud.node(i), cloud.node(j)));
        let problem = RegressionProblem::new(psi, residual, settings.mu2)?;
        let fit = lasso(&problem, settings.regression.tol, settings.source_max_sweeps)?;
        source_fit_ratio = Some(problem.residual(&fit.xi).norm() / problem.target.norm());
        warnings.extend(fit.warnings.iter().cloned());
        sources = fit
            .support
            .iter()
            .map(|&i| SourceTerm { node: i, coordinates: cloud.node(i).to_vec(), amplitude: fit.xi[i] })
            .collect();
        sources.sort_by(|a: &SourceTerm, b: &SourceTerm| b.amplitude.abs().total_cmp(&a.amplitude.abs()));
    }
    let rows = library.matrix.nrows();
    let mut model = finish(
        ModelKind::Eikonal,
        library.map,
        1,
        library.terms,
        ops,
        solution,
        summary,
        rows,
        relative_residual(interp.residual(), samples),
        started,
    );
    model.diagnostics.warnings.extend(warnings);
    model.diagnostics.source_fit_ratio = source_fit_ratio;
    model.sources = sources;
    model.source_kernel = Some(settings.source_kernel);
    Ok(model)
}
