use crate::config::RunConfig;
use crate::data::{self, Dataset};
use crate::{CliError, Common};
use clap::Args;
use nalgebra::DMatrix;
use std::path::{Path, PathBuf};
use surfpde::discovery::{
    discover_biharmonic, discover_eikonal, discover_evolution, discover_stationary, write_model, EikonalSettings,
    ModelKind, RegressionMethod,
};
use surfpde::geometry::{circle_nodes, implicit_surface_nodes, read_point_cloud, sphere_nodes, write_point_cloud};
use surfpde::kernels::GaussianExponent;
use surfpde::recipes::{self, Field, NormalMode};
use surfpde::solver::{
    relative_l2, solve_evolution, solve_stationary, write_trajectory, DEFAULT_MAX_NEWTON, DEFAULT_TOL,
};
use surfpde::{
    build_operators, ForwardProblem, KernelSpec, PointCloud, RegressionSettings, SparseModel, Surface, Trajectory,
};

pub const MAX_NODES: usize = 20_000;

#[derive(Args, Clone, Debug)]
pub struct NodesArgs {
    #[command(flatten)]
    pub common: Common,
    /// circle, sphere, torus, cyclide or bretzel2.
    #[arg(long)]
    pub surface: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// none, analytic or extension.
    #[arg(long)]
    pub normals: Option<String>,
    /// Offset of the normal-extension level sets.
    #[arg(long)]
    pub delta: Option<String>,
    /// File name inside the output directory.
    #[arg(long)]
    pub output: Option<String>,
}

const NODES_KEYS: &[&str] = &["surface", "n", "seed", "normals", "delta", "output", "out_dir"];

pub fn nodes(args: &NodesArgs) -> Result<(), CliError> {
    let overrides = [
        ("surface", args.surface.clone()),
        ("n", args.n.clone()),
        ("seed", args.seed.clone()),
        ("normals", args.normals.clone()),
        ("delta", args.delta.clone()),
        ("output", args.output.clone()),
    ];
    let cfg = RunConfig::load(args.common.config.as_deref(), &overrides, NODES_KEYS)?;
    let surface = Surface::by_name(cfg.required("surface")?).map_err(|e| CliError::Usage(e.to_string()))?;
    let n = cfg.usize_in("n", 0, 1, MAX_NODES)?;
    let seed = cfg.u64("seed", 0)?;
    let cloud = generate_nodes(&surface, n, seed)?;
    let cloud = attach_normals(&cfg, &surface, &cloud, "analytic")?;
    let dir = prepare(&cfg, args.common.out_dir.as_deref())?;
    let path = dir.join(cfg.str_or("output", "nodes.csv"));
    write_point_cloud(&path, &cloud)?;
    data::write_text(&dir.join("nodes.meta"), &cfg.metadata("nodes"))?;
    println!(
        "wrote {}: N = {}, fill distance ~ {:.4e}, seed = {seed}",
        path.display(),
        cloud.len(),
        cloud.fill_distance_estimate()
    );
    Ok(())
}

pub fn generate_nodes(surface: &Surface, n: usize, seed: u64) -> Result<PointCloud, CliError> {
    Ok(match surface.name.as_str() {
        "circle" => circle_nodes(n)?,
        "sphere" => sphere_nodes(n)?,
        _ => implicit_surface_nodes(surface, n, seed)?,
    })
}

pub fn normal_mode(cfg: &RunConfig, default: &str) -> Result<Option<NormalMode>, CliError> {
    match cfg.str_or("normals", default) {
        "none" => Ok(None),
        "analytic" => Ok(Some(NormalMode::Analytic)),
        "extension" => Ok(Some(NormalMode::Extension { delta: cfg.opt_f64_in("delta", f64::MIN_POSITIVE, 1.0)? })),
        other => Err(CliError::Usage(format!("normals must be none, analytic or extension, got '{other}'"))),
    }
}

fn attach_normals(
    cfg: &RunConfig,
    surface: &Surface,
    cloud: &PointCloud,
    default: &str,
) -> Result<PointCloud, CliError> {
    match normal_mode(cfg, default)? {
        None => Ok(cloud.clone()),
        Some(mode) => Ok(recipes::with_normals(surface, cloud, mode)?),
    }
}

/// Resolves and creates the output directory.
pub fn prepare(cfg: &RunConfig, flag: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir(flag);
    std::fs::create_dir_all(&dir).map_err(|e| data::io_error(&dir, e))?;
    Ok(dir)
}

#[derive(Args, Clone, Debug)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub common: Common,
    /// stationary, evolution, eikonal or biharmonic.
    #[arg(long)]
    pub mode: Option<String>,
    /// Point-cloud CSV with normals.
    #[arg(long)]
    pub cloud: Option<String>,
    /// Dataset CSV `t,node_index,u,f`.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub kernel_m: Option<String>,
    #[arg(long)]
    pub ell: Option<String>,
    /// lasso or sqrt-lasso.
    #[arg(long)]
    pub method: Option<String>,
    /// Penalty; `auto` for the square-root LASSO default.
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub normalize: Option<String>,
    #[arg(long)]
    pub rel_tol: Option<String>,
    /// Comma-separated p-Laplacian exponents.
    #[arg(long)]
    pub p_values: Option<String>,
    #[arg(long)]
    pub mu1: Option<String>,
    #[arg(long)]
    pub mu2: Option<String>,
    #[arg(long)]
    pub sigma2: Option<String>,
    /// squared or norm.
    #[arg(long)]
    pub source_exponent: Option<String>,
    #[arg(long)]
    pub source_max_sweeps: Option<String>,
}

pub const DISCOVER_KEYS: &[&str] = &[
    "mode",
    "cloud",
    "data",
    "kernel_m",
    "ell",
    "method",
    "mu",
    "normalize",
    "rel_tol",
    "p_values",
    "mu1",
    "mu2",
    "sigma2",
    "source_exponent",
    "source_max_sweeps",
    "out_dir",
];

pub fn discover(args: &DiscoverArgs) -> Result<(), CliError> {
    let overrides = [
        ("mode", args.mode.clone()),
        ("cloud", args.cloud.clone()),
        ("data", args.data.clone()),
        ("kernel_m", args.kernel_m.clone()),
        ("ell", args.ell.clone()),
        ("method", args.method.clone()),
        ("mu", args.mu.clone()),
        ("normalize", args.normalize.clone()),
        ("rel_tol", args.rel_tol.clone()),
        ("p_values", args.p_values.clone()),
        ("mu1", args.mu1.clone()),
        ("mu2", args.mu2.clone()),
        ("sigma2", args.sigma2.clone()),
        ("source_exponent", args.source_exponent.clone()),
        ("source_max_sweeps", args.source_max_sweeps.clone()),
    ];
    let cfg = RunConfig::load(args.common.config.as_deref(), &overrides, DISCOVER_KEYS)?;
    let cloud = read_point_cloud(&cfg.path("cloud")?)?;
    let dataset = data::read_dataset(&cfg.path("data")?)?;
    if dataset.nodes() != cloud.len() {
        return Err(CliError::Usage(format!("dataset has {} nodes, point cloud has {}", dataset.nodes(), cloud.len())));
    }
    let model = run_discovery(&cfg, cloud, &dataset)?;
    let dir = prepare(&cfg, args.common.out_dir.as_deref())?;
    write_model_files(&dir, &model)?;
    data::write_text(&dir.join("discover.meta"), &cfg.metadata("discover"))?;
    println!("{}", model.equation_abbreviated(10));
    Ok(())
}

/// `model.txt` and `coefficients.csv`.
pub fn write_model_files(dir: &Path, model: &SparseModel) -> Result<(), CliError> {
    write_model(dir.join("model.txt"), model)?;
    data::write_text(&dir.join("coefficients.csv"), &data::format_coefficients(model))
}

/// Smoothness 6 on curves, 4 on surfaces.
pub fn default_kernel(cfg: &RunConfig, dim: usize) -> Result<KernelSpec, CliError> {
    let m = cfg.f64_in("kernel_m", if dim == 2 { 6.0 } else { 4.0 }, 1.0, 20.0)?;
    Ok(KernelSpec::matern(dim, 1, m)?)
}

/// Default penalties: 0.01 except `1` for biharmonic libraries, which are
/// also fitted on raw columns.
pub fn regression_settings(cfg: &RunConfig, mode: ModelKind) -> Result<RegressionSettings, CliError> {
    let biharmonic = mode == ModelKind::Biharmonic;
    let mut settings = match cfg.str_or("method", "lasso") {
        "lasso" => RegressionSettings::lasso(cfg.f64_in("mu", if biharmonic { 1.0 } else { 0.01 }, 0.0, 1e12)?),
        "sqrt-lasso" => RegressionSettings::sqrt_lasso(cfg.opt_f64_in("mu", 0.0, 1e12)?),
        other => return Err(CliError::Usage(format!("method must be lasso or sqrt-lasso, got '{other}'"))),
    };
    if settings.method == RegressionMethod::Lasso {
        settings.normalize_columns = cfg.bool("normalize", !biharmonic)?;
    }
    settings.rel_tol = cfg.f64_in("rel_tol", settings.rel_tol, 1e-16, 0.5)?;
    Ok(settings)
}

pub fn eikonal_settings(cfg: &RunConfig, dim: usize) -> Result<EikonalSettings, CliError> {
    let mut settings = EikonalSettings::standard(dim)?;
    if let Some(p) = cfg.f64_list("p_values")? {
        settings.p_values = p;
    }
    settings.mu1 = cfg.f64_in("mu1", settings.mu1, 0.0, 1e12)?;
    settings.mu2 = cfg.f64_in("mu2", settings.mu2, 0.0, 1e12)?;
    let exponent = match cfg.str_or("source_exponent", "squared") {
        "squared" => GaussianExponent::SquaredNorm,
        "norm" => GaussianExponent::Norm,
        other => return Err(CliError::Usage(format!("source_exponent must be squared or norm, got '{other}'"))),
    };
    settings.source_kernel = KernelSpec::gaussian_with(dim, cfg.f64_in("sigma2", 1.0, 1e-12, 1e12)?, exponent)?;
    settings.source_max_sweeps = cfg.usize_in("source_max_sweeps", settings.source_max_sweeps, 1, 10_000_000)?;
    settings.regression = regression_settings(cfg, ModelKind::Eikonal)?;
    Ok(settings)
}

pub fn mode(cfg: &RunConfig) -> Result<ModelKind, CliError> {
    let name = cfg.required("mode")?;
    ModelKind::from_name(name).ok_or_else(|| {
        CliError::Usage(format!("mode must be stationary, evolution, eikonal or biharmonic, got '{name}'"))
    })
}

pub fn run_discovery(cfg: &RunConfig, cloud: PointCloud, dataset: &Dataset) -> Result<SparseModel, CliError> {
    let mode = mode(cfg)?;
    let kernel = default_kernel(cfg, cloud.dim())?;
    let ell = cfg.usize_in("ell", 2, 1, 4)? as u32;
    let model = match mode {
        ModelKind::Stationary => {
            let (u, f) = dataset.single()?;
            discover_stationary(&cloud, &u, &f, &kernel, ell, &regression_settings(cfg, mode)?)?
        }
        ModelKind::Evolution => {
            let snaps = dataset.snapshots(cloud)?;
            discover_evolution(&snaps, &kernel, ell, &regression_settings(cfg, mode)?)?
        }
        ModelKind::Biharmonic => {
            let (u, _) = dataset.single()?;
            discover_biharmonic(&cloud, &u, &kernel, ell, &regression_settings(cfg, mode)?)?
        }
        ModelKind::Eikonal => {
            let (u, _) = dataset.single()?;
            let settings = eikonal_settings(cfg, cloud.dim())?;
            discover_eikonal(&cloud, &u, &kernel, &settings)?
        }
    };
    Ok(model)
}

#[derive(Args, Clone, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Learned-model file.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub cloud: Option<String>,
    /// Dataset supplying forcing and the initial state.
    #[arg(long)]
    pub data: Option<String>,
    /// none, data, ex1-circle, ex1-sphere, ex2-sphere, ex2-surface or ex4.
    #[arg(long)]
    pub reference: Option<String>,
    /// Surface of the ex2-surface reference.
    #[arg(long)]
    pub surface: Option<String>,
    /// Evolution steps; may exceed the dataset with a closed-form reference.
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub max_newton: Option<String>,
}

const SOLVE_KEYS: &[&str] =
    &["model", "cloud", "data", "reference", "surface", "steps", "tol", "max_newton", "out_dir"];

/// A closed-form solution with the coefficients of the equation it solves.
pub struct Reference {
    pub surface: Surface,
    pub field: Field,
    pub diffusion: f64,
    pub reaction: f64,
}

impl Reference {
    pub fn by_name(name: &str, surface: Option<&str>) -> Result<Option<Reference>, CliError> {
        let (surface, field, diffusion, reaction) = match name {
            "none" | "data" => return Ok(None),
            "ex1-circle" => (Surface::circle(), recipes::CIRCLE_FIELD, 1.0, 0.0),
            "ex1-sphere" => (Surface::sphere(), recipes::SPHERE_FIELD, 1.0, 0.0),
            "ex2-sphere" => (Surface::sphere(), recipes::EXP_FIELD, 0.5, 0.125),
            "ex2-surface" => {
                let name = surface.ok_or_else(|| CliError::Usage("reference ex2-surface needs a surface".into()))?;
                let surface = Surface::by_name(name).map_err(|e| CliError::Usage(e.to_string()))?;
                (surface, recipes::SINE_FIELD, 1.0, 1.0)
            }
            "ex4" => (Surface::sphere(), recipes::HEIGHT_FIELD, 0.0, 0.0),
            other => return Err(CliError::Usage(format!("unknown reference '{other}'"))),
        };
        Ok(Some(Reference { surface, field, diffusion, reaction }))
    }

    pub fn values(&self, cloud: &PointCloud, times: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(cloud.len(), times.len());
        for (j, &t) in times.iter().enumerate() {
            out.set_column(j, &self.field.sample(cloud, t));
        }
        out
    }
}

/// Forward solution and, when a reference exists, its values at the first
/// `reference.ncols()` time levels.
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub reference: Option<DMatrix<f64>>,
}

impl SolveOutcome {
    pub fn compared_times(&self) -> Vec<f64> {
        let levels = self.reference.as_ref().map_or(0, |r| r.ncols());
        (0..levels).map(|j| self.trajectory.time(j)).collect()
    }

    pub fn relative_errors(&self) -> Result<Vec<f64>, CliError> {
        let Some(reference) = &self.reference else {
            return Ok(Vec::new());
        };
        (0..reference.ncols())
            .map(|j| relative_l2(&self.trajectory.state(j), &reference.column(j).into_owned()).map_err(CliError::from))
            .collect()
    }

    pub fn max_abs_error(&self) -> Option<f64> {
        self.reference.as_ref().map(|r| (self.trajectory.values.columns(0, r.ncols()) - r).amax())
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_solve(
    model: &SparseModel,
    cloud: &PointCloud,
    dataset: &Dataset,
    reference: &str,
    reference_surface: Option<&str>,
    steps: Option<usize>,
    tol: f64,
    max_newton: usize,
) -> Result<SolveOutcome, CliError> {
    let closed = Reference::by_name(reference, reference_surface)?;
    let ops = build_operators(cloud, &model.kernel)?;
    match model.kind {
        ModelKind::Evolution => {
            let dt = dataset.dt()?;
            let available = dataset.levels() - 1;
            let steps = steps.unwrap_or(available);
            let (u0, _) = dataset.column(0);
            let problem = match &closed {
                Some(r) => {
                    let f = recipes::evolution_forcing(&r.surface, &r.field, r.diffusion, r.reaction);
                    ForwardProblem::evolution_with(model, &ops, &u0, dt, steps, f)?
                }
                None if steps <= available => {
                    let forcing = dataset.forcing.columns(0, steps + 1).into_owned();
                    ForwardProblem::evolution(model, &ops, &u0, dt, steps, forcing)?
                }
                None => {
                    return Err(CliError::Usage(format!(
                        "{steps} steps exceed the dataset's {available}; name a closed-form reference for the forcing"
                    )))
                }
            };
            let trajectory = solve_evolution(&problem)?;
            let reference = match &closed {
                Some(r) => {
                    let times: Vec<f64> = (0..=steps).map(|j| trajectory.time(j)).collect();
                    Some(r.values(cloud, &times))
                }
                None if reference == "data" => {
                    Some(dataset.values.columns(0, (steps + 1).min(dataset.levels())).into_owned())
                }
                None => None,
            };
            Ok(SolveOutcome { trajectory, reference })
        }
        ModelKind::Eikonal => Err(CliError::Usage("eikonal models have no forward solver".into())),
        _ => {
            let (u, f) = dataset.single()?;
            let problem = ForwardProblem::stationary(model, &ops, &f)?;
            let solution = solve_stationary(&problem, tol, max_newton)?;
            let trajectory = Trajectory {
                dt: 0.0,
                values: DMatrix::from_column_slice(u.len(), 1, solution.as_slice()),
                factorizations: 0,
            };
            let reference = match &closed {
                Some(r) => Some(r.values(cloud, &[0.0])),
                None if reference == "data" => Some(DMatrix::from_column_slice(u.len(), 1, u.as_slice())),
                None => None,
            };
            Ok(SolveOutcome { trajectory, reference })
        }
    }
}

pub fn solve(args: &SolveArgs) -> Result<(), CliError> {
    let overrides = [
        ("model", args.model.clone()),
        ("cloud", args.cloud.clone()),
        ("data", args.data.clone()),
        ("reference", args.reference.clone()),
        ("surface", args.surface.clone()),
        ("steps", args.steps.clone()),
        ("tol", args.tol.clone()),
        ("max_newton", args.max_newton.clone()),
    ];
    let cfg = RunConfig::load(args.common.config.as_deref(), &overrides, SOLVE_KEYS)?;
    let model = surfpde::discovery::read_model(cfg.path("model")?)?;
    let cloud = read_point_cloud(&cfg.path("cloud")?)?;
    let dataset = data::read_dataset(&cfg.path("data")?)?;
    let steps = match cfg.str("steps") {
        Some(_) => Some(cfg.usize_in("steps", 1, 1, 1_000_000)?),
        None => None,
    };
    let outcome = run_solve(
        &model,
        &cloud,
        &dataset,
        cfg.str_or("reference", "none"),
        cfg.str("surface"),
        steps,
        cfg.f64_in("tol", DEFAULT_TOL, 1e-16, 1.0)?,
        cfg.usize_in("max_newton", DEFAULT_MAX_NEWTON, 1, 10_000)?,
    )?;
    let dir = prepare(&cfg, args.common.out_dir.as_deref())?;
    write_solve(&dir, &cfg, &cloud, &outcome)?;
    let levels = outcome.trajectory.steps() + 1;
    match outcome.max_abs_error() {
        Some(abs) => {
            let worst = outcome.relative_errors()?.into_iter().fold(0.0, f64::max);
            println!("solved {levels} time level(s): max relative L2 = {worst:.6e}, max abs error = {abs:.6e}");
        }
        None => println!("solved {levels} time level(s)"),
    }
    Ok(())
}

pub fn write_solve(dir: &Path, cfg: &RunConfig, cloud: &PointCloud, outcome: &SolveOutcome) -> Result<(), CliError> {
    write_trajectory(dir.join("solution.csv"), cloud, &outcome.trajectory)?;
    if let Some(reference) = &outcome.reference {
        let times = outcome.compared_times();
        data::write_text(&dir.join("errors.csv"), &data::format_errors(&times, &outcome.relative_errors()?))?;
        let predicted = outcome.trajectory.values.columns(0, times.len()).into_owned();
        data::write_text(&dir.join("node_errors.csv"), &data::format_node_errors(&times, &predicted, reference))?;
    }
    data::write_text(&dir.join("solve.meta"), &cfg.metadata("solve"))
}

/// Writes the cloud and dataset a recipe generated.
pub fn write_inputs(dir: &Path, cloud: &PointCloud, dataset: &Dataset) -> Result<(), CliError> {
    write_point_cloud(&dir.join("cloud.csv"), cloud)?;
    data::write_dataset(&dir.join("data.csv"), dataset)
}
