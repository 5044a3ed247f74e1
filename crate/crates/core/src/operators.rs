//! Interpolation system and discrete extrinsic surface operators.
//!
//! With Gram matrix `G = Phi(X, X)` and `B_k[i, j] = (P(x_i) grad_x Phi(x_i, x_j))_k`,
//! the nodal surface gradient is `D_k = B_k G^{-1}` and the Laplace–Beltrami
//! matrix is `L = sum_k D_k D_k`. Products are applied through the cached
//! Cholesky factor; the dense `D_k` and `L` are only formed on request.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::SpdFactor;
use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

/// Relative interpolation residual above which an interpolant is flagged.
pub const INTERPOLATION_TOL: f64 = 1e-8;

#[derive(Debug)]
pub struct DiscreteOperators {
    cloud: PointCloud,
    kernel: KernelSpec,
    gram: DMatrix<f64>,
    factor: SpdFactor,
    grad_kernel: Vec<DMatrix<f64>>,
    grad_nodal: OnceLock<Vec<DMatrix<f64>>>,
    laplacian: OnceLock<DMatrix<f64>>,
}

/// Assembles the Gram matrix, factorizes it and forms the projected kernel
/// gradient matrices `B_k`.
pub fn build_operators(cloud: &PointCloud, kernel: &KernelSpec) -> Result<DiscreteOperators> {
    if !cloud.has_normals() {
        return Err(Error::invalid("operators need a point cloud with normals"));
    }
    if kernel.ambient_dim != cloud.dim() {
        return Err(Error::invalid(format!(
            "kernel dimension {} does not match cloud dimension {}",
            kernel.ambient_dim,
            cloud.dim()
        )));
    }
    kernel.require_gradient()?;
    let n = cloud.len();
    let d = cloud.dim();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let xj = cloud.node(j);
        for i in j..n {
            let v = kernel.value(cloud.node(i), xj);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let factor = SpdFactor::new(gram.clone())?;

    let mut grad_kernel = vec![DMatrix::<f64>::zeros(n, n); d];
    let mut g = vec![0.0; d];
    let mut pg = vec![0.0; d];
    for j in 0..n {
        let xj = cloud.node(j);
        for i in (j + 1)..n {
            kernel.gradient_x_into(cloud.node(i), xj, &mut g);
            // grad_x Phi(x_j, x_i) = -grad_x Phi(x_i, x_j)
            for (row, col, sign) in [(i, j, 1.0), (j, i, -1.0)] {
                let p = cloud.projection(row).expect("projections present");
                for (k, out) in pg.iter_mut().enumerate() {
                    *out = sign * (0..d).map(|l| p[(k, l)] * g[l]).sum::<f64>();
                }
                for k in 0..d {
                    grad_kernel[k][(row, col)] = pg[k];
                }
            }
        }
    }
    Ok(DiscreteOperators {
        cloud: cloud.clone(),
        kernel: *kernel,
        gram,
        factor,
        grad_kernel,
        grad_nodal: OnceLock::new(),
        laplacian: OnceLock::new(),
    })
}

impl DiscreteOperators {
    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    /// Unjittered Gram matrix `Phi(X, X)`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Diagonal shift used by the factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    pub fn condition_estimate(&self) -> f64 {
        self.factor.condition_estimate()
    }

    /// The matrices `B_k`.
    pub fn grad_kernel_mats(&self) -> &[DMatrix<f64>] {
        &self.grad_kernel
    }

    /// Dense `D_k = B_k G^{-1}`, formed on first use.
    pub fn grad_nodal_mats(&self) -> &[DMatrix<f64>] {
        self.grad_nodal
            .get_or_init(|| self.grad_kernel.iter().map(|b| self.factor.solve(&b.transpose()).transpose()).collect())
    }

    /// Dense `L = sum_k D_k D_k`, formed on first use.
    pub fn laplacian_nodal(&self) -> &DMatrix<f64> {
        self.laplacian.get_or_init(|| {
            let n = self.len();
            let mut l = DMatrix::<f64>::zeros(n, n);
            for dk in self.grad_nodal_mats() {
                l.gemm(1.0, dk, dk, 1.0);
            }
            l
        })
    }

    /// Interpolation coefficients `G^{-1} U` for each column of `U`.
    pub fn coefficients(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(values)
    }

    /// Surface-gradient components `D_k U`, one `N x M` block per axis.
    pub fn gradient_batch(&self, values: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let kappa = self.coefficients(values);
        self.grad_kernel.iter().map(|b| b * &kappa).collect()
    }

    /// `sum_k D_k V_k` for a field given by its nodal components.
    pub fn divergence_batch(&self, components: &[DMatrix<f64>]) -> DMatrix<f64> {
        assert_eq!(components.len(), self.dim(), "one block per axis");
        let n = self.len();
        let m = components[0].ncols();
        let mut stacked = DMatrix::<f64>::zeros(n, m * components.len());
        for (k, c) in components.iter().enumerate() {
            stacked.columns_mut(k * m, m).copy_from(c);
        }
        self.factor.solve_mut(&mut stacked);
        let mut out = DMatrix::<f64>::zeros(n, m);
        for (k, b) in self.grad_kernel.iter().enumerate() {
            out.gemm(1.0, b, &stacked.columns(k * m, m), 1.0);
        }
        out
    }

    /// `L U` without forming `L`.
    pub fn laplacian_batch(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        self.divergence_batch(&self.gradient_batch(values))
    }

    /// p-Laplacian of each column given its nodal surface gradient. The
    /// weights `|g|^{p-2}` are formed in log space so that large `p` only
    /// fails when the result itself overflows.
    pub fn p_laplacian_from_gradient(&self, grads: &[DMatrix<f64>], p: f64) -> Result<DMatrix<f64>> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::invalid(format!("p-Laplacian needs finite p >= 2, got {p}")));
        }
        let mut weighted = grads.to_vec();
        if p > 2.0 {
            let half = 0.5 * (p - 2.0);
            let (n, m) = grads[0].shape();
            for c in 0..m {
                for i in 0..n {
                    let s: f64 = grads.iter().map(|g| g[(i, c)] * g[(i, c)]).sum();
                    let w = (half * s.ln()).exp();
                    if !w.is_finite() {
                        return Err(Error::NonFinite(format!("p-Laplacian weight overflows at node {i} for p = {p}")));
                    }
                    for g in weighted.iter_mut() {
                        g[(i, c)] *= w;
                    }
                }
            }
        }
        let out = self.divergence_batch(&weighted);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("p-Laplacian output for p = {p}")));
        }
        Ok(out)
    }

    /// Fourth-order channels need `m >= 4` for Matérn kernels.
    pub(crate) fn require_fourth_order(&self) -> Result<()> {
        match self.kernel.family {
            KernelFamily::MaternSobolev { m, .. } if m < 4.0 => Err(Error::UnsupportedSmoothness(format!(
                "fourth-order operators need smoothness m >= 4, kernel has m = {m}"
            ))),
            _ => Ok(()),
        }
    }

    fn check_len(&self, values: &DVector<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!("expected {} nodal values, got {}", self.len(), values.len())));
        }
        Ok(())
    }
}

/// Kernel interpolant `sum_i kappa_i Phi(x, x_i)` of nodal samples.
#[derive(Clone, Debug)]
pub struct Interpolant<'a> {
    ops: &'a DiscreteOperators,
    samples: DVector<f64>,
    coefficients: DVector<f64>,
    residual: f64,
}

pub fn interpolate<'a>(ops: &'a DiscreteOperators, samples: &DVector<f64>) -> Result<Interpolant<'a>> {
    ops.check_len(samples)?;
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("sample {i} is not finite")));
    }
    let coefficients = ops.factor.solve_vec(samples);
    let residual = (&ops.gram * &coefficients - samples).amax();
    Ok(Interpolant { ops, samples: samples.clone(), coefficients, residual })
}

impl<'a> Interpolant<'a> {
    /// Builds an interpolant from given coefficients; the samples are the
    /// interpolant's own nodal values.
    pub fn from_coefficients(ops: &'a DiscreteOperators, coefficients: DVector<f64>) -> Result<Self> {
        ops.check_len(&coefficients)?;
        let samples = &ops.gram * &coefficients;
        Ok(Interpolant { ops, samples, coefficients, residual: 0.0 })
    }

    pub fn ops(&self) -> &'a DiscreteOperators {
        self.ops
    }

    pub fn samples(&self) -> &DVector<f64> {
        &self.samples
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    /// `max_i |(G kappa)_i - u_i|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_well_conditioned(&self) -> bool {
        self.residual <= INTERPOLATION_TOL * self.samples.amax()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.ops.cloud.nodes().zip(self.coefficients.iter()).map(|(xi, k)| k * self.ops.kernel.value(x, xi)).sum()
    }
}

pub fn evaluate(interp: &Interpolant<'_>, x: &[f64]) -> f64 {
    interp.evaluate(x)
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn to_vector(m: DMatrix<f64>) -> DVector<f64> {
    DVector::from_vec(m.data.into())
}

/// Nodal surface gradient, one vector per ambient axis.
pub fn surface_gradient_nodal(ops: &DiscreteOperators, values: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    ops.check_len(values)?;
    Ok(ops.gradient_batch(&column(values)).into_iter().map(to_vector).collect())
}

pub fn laplace_beltrami_nodal(ops: &DiscreteOperators, values: &DVector<f64>) -> Result<DVector<f64>> {
    ops.check_len(values)?;
    Ok(to_vector(ops.laplacian_batch(&column(values))))
}

/// Surface p-Laplacian `div_S(|grad_S u|^{p-2} grad_S u)`.
pub fn p_laplacian_nodal(ops: &DiscreteOperators, values: &DVector<f64>, p: f64) -> Result<DVector<f64>> {
    ops.check_len(values)?;
    let grads = ops.gradient_batch(&column(values));
    Ok(to_vector(ops.p_laplacian_from_gradient(&grads, p)?))
}

/// `L (L u)`.
pub fn biharmonic_nodal(ops: &DiscreteOperators, values: &DVector<f64>) -> Result<DVector<f64>> {
    ops.require_fourth_order()?;
    let lap = laplace_beltrami_nodal(ops, values)?;
    laplace_beltrami_nodal(ops, &lap)
}

/// `D_k (L u)`.
pub fn grad_of_laplacian_nodal(ops: &DiscreteOperators, values: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    ops.require_fourth_order()?;
    let lap = laplace_beltrami_nodal(ops, values)?;
    surface_gradient_nodal(ops, &lap)
}
