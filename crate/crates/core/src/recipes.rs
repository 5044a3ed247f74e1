//! Reference datasets for the built-in experiments: closed-form fields,
//! their exact surface Laplacians, noise injection and node sets.

use crate::discovery::Snapshots;
use crate::error::{Error, Result};
use crate::geometry::{
    analytic_normals, circle_nodes, default_offset, implicit_surface_nodes, normal_extension, rough_normals,
    sphere_nodes, PointCloud, Surface, DEFAULT_NEIGHBORS,
};
use crate::kernels::KernelSpec;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// A smooth space-time field on the ambient space with its derivatives.
#[derive(Clone, Copy)]
pub struct Field {
    pub value: fn(&[f64], f64) -> f64,
    pub gradient: fn(&[f64], f64) -> Vec<f64>,
    pub hessian: fn(&[f64], f64) -> DMatrix<f64>,
    pub time_derivative: fn(&[f64], f64) -> f64,
}

impl Field {
    pub fn sample(&self, cloud: &PointCloud, t: f64) -> DVector<f64> {
        DVector::from_iterator(cloud.len(), cloud.nodes().map(|x| (self.value)(x, t)))
    }
}

/// Exact `Delta_S u` at a point of `{F = 0}`:
/// `tr H_u - n^T H_u n - kappa (n . grad u)` with `n = grad F / |grad F|`
/// and `kappa = (tr H_F - n^T H_F n) / |grad F|`.
pub fn surface_laplacian(surface: &Surface, field: &Field, x: &[f64], t: f64) -> Result<f64> {
    let (gf, hf) = match (surface.gradient(x), surface.hessian(x)) {
        (Some(g), Some(h)) => (DVector::from_vec(g), h),
        _ => return Err(Error::invalid(format!("surface '{}' has no implicit derivatives", surface.name))),
    };
    let norm = gf.norm();
    if !(norm > 1e-12) {
        return Err(Error::SingularGradient { index: 0, norm });
    }
    let n = gf / norm;
    let kappa = (hf.trace() - n.dot(&(&hf * &n))) / norm;
    let gu = DVector::from_vec((field.gradient)(x, t));
    let hu = (field.hessian)(x, t);
    Ok(hu.trace() - n.dot(&(&hu * &n)) - kappa * n.dot(&gu))
}

fn surface_laplacian_at(surface: &Surface, field: &Field, cloud: &PointCloud, t: f64) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(cloud.len());
    for (i, x) in cloud.nodes().enumerate() {
        out[i] = surface_laplacian(surface, field, x, t)?;
    }
    Ok(out)
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64).sqrt()
}

/// Adds i.i.d. Gaussian noise with standard deviation `level * RMS(values)`.
pub fn add_noise(values: &DMatrix<f64>, level: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(values.clone());
    }
    let normal = Normal::new(0.0, level * rms(values.as_slice())).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values.map(|v| v + normal.sample(&mut rng)))
}

pub fn add_noise_vec(values: &DVector<f64>, level: f64, seed: u64) -> Result<DVector<f64>> {
    let m = DMatrix::from_column_slice(values.len(), 1, values.as_slice());
    Ok(add_noise(&m, level, seed)?.column(0).into_owned())
}

/// How node normals are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormalMode {
    /// From the implicit function.
    Analytic,
    /// kNN estimates refined by the kernel level-set fit with offset `delta`
    /// (default `0.45` of the minimum separation).
    Extension { delta: Option<f64> },
}

/// Replaces the normals of `cloud` according to `mode`.
pub fn with_normals(surface: &Surface, cloud: &PointCloud, mode: NormalMode) -> Result<PointCloud> {
    match mode {
        NormalMode::Analytic => analytic_normals(surface, cloud),
        NormalMode::Extension { delta } => {
            let bare = PointCloud::new(cloud.dim(), cloud.coordinates().to_vec())?;
            let rough = rough_normals(&bare, DEFAULT_NEIGHBORS)?;
            let delta = delta.unwrap_or_else(|| default_offset(&rough));
            let kernel = KernelSpec::matern(cloud.dim(), 1, 4.0)?;
            Ok(normal_extension(&rough, delta, &kernel)?.1)
        }
    }
}

/// Samples, forcing and clean reference of a stationary experiment.
#[derive(Clone, Debug)]
pub struct StationaryData {
    pub cloud: PointCloud,
    pub samples: DVector<f64>,
    pub forcing: DVector<f64>,
    pub clean: DVector<f64>,
}

/// `u = e^{x+y} (x^3 + y^4 + 1)` on the unit circle.
pub const CIRCLE_FIELD: Field = Field {
    value: |x, _| (x[0] + x[1]).exp() * (x[0].powi(3) + x[1].powi(4) + 1.0),
    gradient: |x, _| {
        let e = (x[0] + x[1]).exp();
        let g = x[0].powi(3) + x[1].powi(4) + 1.0;
        vec![e * (g + 3.0 * x[0] * x[0]), e * (g + 4.0 * x[1].powi(3))]
    },
    hessian: |x, _| {
        let e = (x[0] + x[1]).exp();
        let g = x[0].powi(3) + x[1].powi(4) + 1.0;
        let xy = e * (g + 3.0 * x[0] * x[0] + 4.0 * x[1].powi(3));
        DMatrix::from_row_slice(
            2,
            2,
            &[e * (g + 6.0 * x[0] * x[0] + 6.0 * x[0]), xy, xy, e * (g + 8.0 * x[1].powi(3) + 12.0 * x[1] * x[1])],
        )
    },
    time_derivative: |_, _| 0.0,
};

/// `u = 10xyz + 5xy + z` on the unit sphere.
pub const SPHERE_FIELD: Field = Field {
    value: |x, _| 10.0 * x[0] * x[1] * x[2] + 5.0 * x[0] * x[1] + x[2],
    gradient: |x, _| vec![10.0 * x[1] * x[2] + 5.0 * x[1], 10.0 * x[0] * x[2] + 5.0 * x[0], 10.0 * x[0] * x[1] + 1.0],
    hessian: |x, _| {
        let (a, b, c) = (10.0 * x[2] + 5.0, 10.0 * x[1], 10.0 * x[0]);
        DMatrix::from_row_slice(3, 3, &[0.0, a, b, a, 0.0, c, b, c, 0.0])
    },
    time_derivative: |_, _| 0.0,
};

/// `u = e^{x+y+z} e^{-t}`.
pub const EXP_FIELD: Field = Field {
    value: |x, t| (x[0] + x[1] + x[2] - t).exp(),
    gradient: |x, t| vec![(x[0] + x[1] + x[2] - t).exp(); 3],
    hessian: |x, t| DMatrix::from_element(3, 3, (x[0] + x[1] + x[2] - t).exp()),
    time_derivative: |x, t| -(x[0] + x[1] + x[2] - t).exp(),
};

/// `u = sin x sin y sin z sin t`.
pub const SINE_FIELD: Field = Field {
    value: |x, t| x[0].sin() * x[1].sin() * x[2].sin() * t.sin(),
    gradient: |x, t| {
        let (s, c) = ([x[0].sin(), x[1].sin(), x[2].sin()], [x[0].cos(), x[1].cos(), x[2].cos()]);
        let st = t.sin();
        vec![c[0] * s[1] * s[2] * st, s[0] * c[1] * s[2] * st, s[0] * s[1] * c[2] * st]
    },
    hessian: |x, t| {
        let (s, c) = ([x[0].sin(), x[1].sin(), x[2].sin()], [x[0].cos(), x[1].cos(), x[2].cos()]);
        let st = t.sin();
        DMatrix::from_fn(3, 3, |i, j| {
            let factor: f64 = (0..3)
                .map(|k| match (k == i, k == j) {
                    (true, true) => -s[k],
                    (true, false) | (false, true) => c[k],
                    (false, false) => s[k],
                })
                .product();
            factor * st
        })
    },
    time_derivative: |x, t| x[0].sin() * x[1].sin() * x[2].sin() * t.cos(),
};

/// `u = z`, an eigenfunction of every power of `Delta_S` on the unit sphere.
pub const HEIGHT_FIELD: Field = Field {
    value: |x, _| x[2],
    gradient: |_, _| vec![0.0, 0.0, 1.0],
    hessian: |_, _| DMatrix::zeros(3, 3),
    time_derivative: |_, _| 0.0,
};

/// `-Delta_S u + u = f` data on a prepared cloud.
pub fn stationary_data(
    surface: &Surface,
    cloud: PointCloud,
    field: &Field,
    noise: f64,
    seed: u64,
) -> Result<StationaryData> {
    let clean = field.sample(&cloud, 0.0);
    let forcing = -surface_laplacian_at(surface, field, &cloud, 0.0)? + &clean;
    let samples = add_noise_vec(&clean, noise, seed)?;
    Ok(StationaryData { cloud, samples, forcing, clean })
}

/// Example 1 on `n` equally spaced circle nodes.
pub fn ex1_circle(n: usize, noise: f64, seed: u64) -> Result<StationaryData> {
    stationary_data(&Surface::circle(), circle_nodes(n)?, &CIRCLE_FIELD, noise, seed)
}

/// Example 1 on `n` Fibonacci sphere nodes.
pub fn ex1_sphere(n: usize, normals: NormalMode, noise: f64, seed: u64) -> Result<StationaryData> {
    let surface = Surface::sphere();
    let cloud = with_normals(&surface, &sphere_nodes(n)?, normals)?;
    stationary_data(&surface, cloud, &SPHERE_FIELD, noise, seed)
}

/// Snapshots of `u_t = a Delta_S u + r u^2 - f` with `f` manufactured from
/// `field`, `t_j = j dt` for `j = 0..=steps`. Noise is added to the samples
/// only.
#[allow(clippy::too_many_arguments)]
pub fn evolution_data(
    surface: &Surface,
    cloud: PointCloud,
    field: &Field,
    a: f64,
    r: f64,
    dt: f64,
    steps: usize,
    noise: f64,
    seed: u64,
) -> Result<Snapshots> {
    let n = cloud.len();
    let mut values = DMatrix::zeros(n, steps + 1);
    let mut forcing = DMatrix::zeros(n, steps + 1);
    for j in 0..=steps {
        let t = j as f64 * dt;
        for (i, x) in cloud.nodes().enumerate() {
            let u = (field.value)(x, t);
            values[(i, j)] = u;
            forcing[(i, j)] = a * surface_laplacian(surface, field, x, t)? + r * u * u - (field.time_derivative)(x, t);
        }
    }
    let values = add_noise(&values, noise, seed)?;
    Snapshots::new(cloud, dt, values, forcing)
}

/// `f(x, t) = a Delta_S u + r u^2 - u_t` for the closed-form `field`; NaN
/// where the surface Laplacian is undefined.
pub fn evolution_forcing<'a>(
    surface: &'a Surface,
    field: &'a Field,
    a: f64,
    r: f64,
) -> impl Fn(&[f64], f64) -> f64 + 'a {
    move |x, t| {
        let u = (field.value)(x, t);
        let lap = surface_laplacian(surface, field, x, t).unwrap_or(f64::NAN);
        a * lap + r * u * u - (field.time_derivative)(x, t)
    }
}

/// Example 2 on the sphere: `u = e^{x+y+z-t}`, `a = 0.5`, `r = 0.125`.
pub fn ex2_sphere(n: usize, dt: f64, steps: usize, noise: f64, seed: u64) -> Result<Snapshots> {
    let surface = Surface::sphere();
    evolution_data(&surface, sphere_nodes(n)?, &EXP_FIELD, 0.5, 0.125, dt, steps, noise, seed)
}

/// Example 2 on a general surface: `u = sin x sin y sin z sin t`,
/// `a = r = 1`, nodes from the seeded implicit generator with analytic normals.
pub fn ex2_surface(surface: &Surface, n: usize, dt: f64, steps: usize, noise: f64, seed: u64) -> Result<Snapshots> {
    let cloud = analytic_normals(surface, &implicit_surface_nodes(surface, n, seed)?)?;
    evolution_data(surface, cloud, &SINE_FIELD, 1.0, 1.0, dt, steps, noise, seed)
}

/// Example 4 samples `u = z` on the sphere.
pub fn ex4_sphere(n: usize, normals: NormalMode) -> Result<(PointCloud, DVector<f64>)> {
    let surface = Surface::sphere();
    let cloud = with_normals(&surface, &sphere_nodes(n)?, normals)?;
    let u = HEIGHT_FIELD.sample(&cloud, 0.0);
    Ok((cloud, u))
}

/// Geodesic distance on `n` equally spaced circle nodes to node `source`.
pub fn ex3_circle(n: usize, source: usize) -> Result<(PointCloud, DVector<f64>)> {
    if source >= n {
        return Err(Error::invalid(format!("source node {source} out of range for N = {n}")));
    }
    let cloud = circle_nodes(n)?;
    let u = DVector::from_fn(n, |i, _| {
        let k = i.abs_diff(source);
        2.0 * PI * k.min(n - k) as f64 / n as f64
    });
    Ok((cloud, u))
}

/// Geodesic distance on the sphere to node 0, the node nearest `(0, 0, 1)`.
pub fn ex3_sphere(n: usize) -> Result<(PointCloud, DVector<f64>)> {
    let cloud = sphere_nodes(n)?;
    let s = cloud.node(0).to_vec();
    let u = DVector::from_iterator(
        n,
        cloud.nodes().map(|x| (x[0] * s[0] + x[1] * s[1] + x[2] * s[2]).clamp(-1.0, 1.0).acos()),
    );
    Ok((cloud, u))
}

/// Geodesic distance on the torus to its inner and outer equators.
pub fn ex3_torus(n: usize, seed: u64) -> Result<(PointCloud, DVector<f64>)> {
    let surface = Surface::torus();
    let cloud = analytic_normals(&surface, &implicit_surface_nodes(&surface, n, seed)?)?;
    let u = DVector::from_iterator(
        n,
        cloud.nodes().map(|x| {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let phi = x[2].atan2(rho - 1.0).abs();
            phi.min(PI - phi) / 3.0
        }),
    );
    Ok((cloud, u))
}
