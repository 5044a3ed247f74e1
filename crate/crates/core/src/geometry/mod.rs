//! Closed surfaces, node sets and tangent-space projections.

mod io;
mod nodes;
mod normals;

pub use io::{fmt_f64, format_point_cloud, parse_point_cloud, read_point_cloud, write_point_cloud};
pub use nodes::{circle_nodes, implicit_surface_nodes, sphere_nodes};
pub use normals::{
    analytic_normals, default_offset, normal_extension, rough_normals, LevelSetModel, DEFAULT_NEIGHBORS,
};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A closed hypersurface `{x : F(x) = 0}` in `R^d`, possibly without a known
/// implicit function.
#[derive(Clone)]
pub struct Surface {
    pub name: String,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    implicit_fn: Option<ScalarField>,
    implicit_gradient: Option<VectorField>,
    implicit_hessian: Option<MatrixField>,
    /// Axis-aligned box enclosing the surface, used for candidate sampling.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Surface")
            .field("name", &self.name)
            .field("ambient_dim", &self.ambient_dim)
            .field("intrinsic_dim", &self.intrinsic_dim)
            .field("implicit", &self.implicit_fn.is_some())
            .finish()
    }
}

const FD_STEP: f64 = 1e-6;
const FD_HESSIAN_STEP: f64 = 1e-4;

impl Surface {
    /// A surface given by a scalar field, with optional analytic derivatives.
    pub fn implicit(
        name: impl Into<String>,
        ambient_dim: usize,
        f: ScalarField,
        gradient: Option<VectorField>,
        hessian: Option<MatrixField>,
        bounds: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Surface> {
        if ambient_dim < 2 {
            return Err(Error::invalid("a hypersurface needs ambient dimension >= 2"));
        }
        Ok(Surface {
            name: name.into(),
            ambient_dim,
            intrinsic_dim: ambient_dim - 1,
            implicit_fn: Some(f),
            implicit_gradient: gradient,
            implicit_hessian: hessian,
            bounds,
        })
    }

    /// A surface known only through its samples.
    pub fn point_cloud_only(name: impl Into<String>, ambient_dim: usize) -> Surface {
        Surface {
            name: name.into(),
            ambient_dim,
            intrinsic_dim: ambient_dim.saturating_sub(1).max(1),
            implicit_fn: None,
            implicit_gradient: None,
            implicit_hessian: None,
            bounds: None,
        }
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim - self.intrinsic_dim
    }

    pub fn has_implicit(&self) -> bool {
        self.implicit_fn.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        self.implicit_fn.as_ref().map(|f| f(x))
    }

    /// `grad F`, analytic when available, otherwise central differences.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if let Some(g) = &self.implicit_gradient {
            return Some(g(x));
        }
        let f = self.implicit_fn.as_ref()?;
        Some(
            (0..x.len())
                .map(|k| {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] += FD_STEP;
                    xm[k] -= FD_STEP;
                    (f(&xp) - f(&xm)) / (2.0 * FD_STEP)
                })
                .collect(),
        )
    }

    /// Hessian of `F`, analytic when available, otherwise differences of the gradient.
    pub fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        if let Some(h) = &self.implicit_hessian {
            return Some(h(x));
        }
        self.implicit_fn.as_ref()?;
        let d = x.len();
        let mut h = DMatrix::zeros(d, d);
        for k in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += FD_HESSIAN_STEP;
            xm[k] -= FD_HESSIAN_STEP;
            let gp = self.gradient(&xp)?;
            let gm = self.gradient(&xm)?;
            for i in 0..d {
                h[(i, k)] = (gp[i] - gm[i]) / (2.0 * FD_HESSIAN_STEP);
            }
        }
        Some(0.5 * (&h + h.transpose()))
    }

    /// Unit circle `x^2 + y^2 - 1 = 0`.
    pub fn circle() -> Surface {
        Self::unit_sphere_in(2, "circle")
    }

    /// Unit sphere `x^2 + y^2 + z^2 - 1 = 0`.
    pub fn sphere() -> Surface {
        Self::unit_sphere_in(3, "sphere")
    }

    fn unit_sphere_in(d: usize, name: &str) -> Surface {
        Surface::implicit(
            name,
            d,
            Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() - 1.0),
            Some(Arc::new(|x: &[f64]| x.iter().map(|v| 2.0 * v).collect())),
            Some(Arc::new(move |_x: &[f64]| DMatrix::identity(d, d) * 2.0)),
            Some((vec![-1.1; d], vec![1.1; d])),
        )
        .expect("static surface")
    }

    /// Ring torus with major radius 1 and minor radius 1/3:
    /// `(|x|^2 + 1 - 1/9)^2 - 4 (x^2 + y^2) = 0`.
    pub fn torus() -> Surface {
        const C: f64 = 1.0 - 1.0 / 9.0;
        Surface::implicit(
            "torus",
            3,
            Arc::new(|x: &[f64]| {
                let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + C;
                a * a - 4.0 * (x[0] * x[0] + x[1] * x[1])
            }),
            Some(Arc::new(|x: &[f64]| {
                let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + C;
                vec![4.0 * a * x[0] - 8.0 * x[0], 4.0 * a * x[1] - 8.0 * x[1], 4.0 * a * x[2]]
            })),
            Some(Arc::new(|x: &[f64]| {
                let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + C;
                DMatrix::from_fn(3, 3, |i, j| {
                    let mut v = 8.0 * x[i] * x[j];
                    if i == j {
                        v += 4.0 * a - if i < 2 { 8.0 } else { 0.0 };
                    }
                    v
                })
            })),
            Some((vec![-1.45, -1.45, -0.45], vec![1.45, 1.45, 0.45])),
        )
        .expect("static surface")
    }

    /// Dupin cyclide
    /// `(|x|^2 - 1 + 1.9^2)^2 - 4 (2x + sqrt(4 - 1.9^2))^2 - 4 (1.9 y)^2 = 0`.
    pub fn cyclide() -> Surface {
        const B2: f64 = 1.9 * 1.9;
        let c = (4.0 - B2).sqrt();
        Surface::implicit(
            "cyclide",
            3,
            Arc::new(move |x: &[f64]| {
                let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0 + B2;
                let q = 2.0 * x[0] + c;
                a * a - 4.0 * q * q - 4.0 * B2 * x[1] * x[1]
            }),
            Some(Arc::new(move |x: &[f64]| {
                let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0 + B2;
                let q = 2.0 * x[0] + c;
                vec![4.0 * a * x[0] - 16.0 * q, 4.0 * a * x[1] - 8.0 * B2 * x[1], 4.0 * a * x[2]]
            })),
            Some(Arc::new(move |x: &[f64]| {
                let a = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0 + B2;
                let mut h = DMatrix::from_fn(3, 3, |i, j| 8.0 * x[i] * x[j] + if i == j { 4.0 * a } else { 0.0 });
                h[(0, 0)] -= 32.0;
                h[(1, 1)] -= 8.0 * B2;
                h
            })),
            Some((vec![-2.5, -3.1, -1.7], vec![3.75, 3.1, 1.7])),
        )
        .expect("static surface")
    }

    /// Genus-two "Bretzel2":
    /// `(x^2 (1 - x^2) - y^2)^2 + z^2/2 - (x^2 + y^2 + z^2)/40 - 1/40 = 0`.
    pub fn bretzel2() -> Surface {
        Surface::implicit(
            "bretzel2",
            3,
            Arc::new(|x: &[f64]| {
                let g = x[0] * x[0] * (1.0 - x[0] * x[0]) - x[1] * x[1];
                let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                g * g + 0.5 * x[2] * x[2] - s / 40.0 - 1.0 / 40.0
            }),
            Some(Arc::new(|x: &[f64]| {
                let g = x[0] * x[0] * (1.0 - x[0] * x[0]) - x[1] * x[1];
                let gx = 2.0 * x[0] - 4.0 * x[0].powi(3);
                let gy = -2.0 * x[1];
                vec![2.0 * g * gx - x[0] / 20.0, 2.0 * g * gy - x[1] / 20.0, x[2] - x[2] / 20.0]
            })),
            Some(Arc::new(|x: &[f64]| {
                let g = x[0] * x[0] * (1.0 - x[0] * x[0]) - x[1] * x[1];
                let gx = 2.0 * x[0] - 4.0 * x[0].powi(3);
                let gy = -2.0 * x[1];
                let gxx = 2.0 - 12.0 * x[0] * x[0];
                let gyy = -2.0;
                let mut h = DMatrix::zeros(3, 3);
                h[(0, 0)] = 2.0 * gx * gx + 2.0 * g * gxx - 1.0 / 20.0;
                h[(1, 1)] = 2.0 * gy * gy + 2.0 * g * gyy - 1.0 / 20.0;
                h[(0, 1)] = 2.0 * gx * gy;
                h[(1, 0)] = h[(0, 1)];
                h[(2, 2)] = 1.0 - 1.0 / 20.0;
                h
            })),
            Some((vec![-1.35, -0.75, -0.45], vec![1.35, 0.75, 0.45])),
        )
        .expect("static surface")
    }

    /// Looks up one of the built-in surfaces by name.
    pub fn by_name(name: &str) -> Result<Surface> {
        match name {
            "circle" => Ok(Self::circle()),
            "sphere" => Ok(Self::sphere()),
            "torus" => Ok(Self::torus()),
            "cyclide" => Ok(Self::cyclide()),
            "bretzel2" => Ok(Self::bretzel2()),
            other => Err(Error::invalid(format!(
                "unknown surface '{other}' (expected circle, sphere, torus, cyclide or bretzel2)"
            ))),
        }
    }
}

/// `N` nodes in `R^d` with optional unit normals and the derived projections.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    nodes: Vec<f64>,
    normals: Option<Vec<f64>>,
    projections: Vec<DMatrix<f64>>,
    min_separation: f64,
}

const NORMAL_TOL: f64 = 1e-12;

impl PointCloud {
    /// Builds a cloud from row-major coordinates. Nodes must be pairwise distinct.
    pub fn new(dim: usize, nodes: Vec<f64>) -> Result<PointCloud> {
        if dim == 0 || nodes.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "coordinate buffer of length {} is not a multiple of dimension {dim}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite node coordinate"));
        }
        let n = nodes.len() / dim;
        let mut min_sep = f64::INFINITY;
        for i in 0..n {
            let xi = &nodes[i * dim..(i + 1) * dim];
            for j in i + 1..n {
                let r = crate::kernels::distance(xi, &nodes[j * dim..(j + 1) * dim]);
                if r == 0.0 {
                    return Err(Error::invalid(format!("nodes {i} and {j} coincide")));
                }
                min_sep = min_sep.min(r);
            }
        }
        Ok(PointCloud { dim, nodes, normals: None, projections: Vec::new(), min_separation: min_sep })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<PointCloud> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("points have inconsistent dimensions"));
        }
        Self::new(dim, points.concat())
    }

    /// Attaches normals (normalized here) and rebuilds projection matrices.
    pub fn with_normals(mut self, normals: Vec<f64>) -> Result<PointCloud> {
        if normals.len() != self.nodes.len() {
            return Err(Error::invalid("normals buffer does not match nodes"));
        }
        let d = self.dim;
        let mut normals = normals;
        for (i, n) in normals.chunks_mut(d).enumerate() {
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > NORMAL_TOL) || !norm.is_finite() {
                return Err(Error::invalid(format!("normal at node {i} has zero length")));
            }
            n.iter_mut().for_each(|v| *v /= norm);
        }
        self.projections = normals.chunks(d).map(projection_matrix).collect();
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks(self.dim)
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.nodes
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        self.normals.as_ref().map(|n| &n[i * self.dim..(i + 1) * self.dim])
    }

    pub fn normals(&self) -> Option<&[f64]> {
        self.normals.as_deref()
    }

    /// `P(x_i) = I - n_i n_i^T`; empty until normals are attached.
    pub fn projection(&self, i: usize) -> Option<&DMatrix<f64>> {
        self.projections.get(i)
    }

    pub fn projections(&self) -> &[DMatrix<f64>] {
        &self.projections
    }

    /// Minimum pairwise node distance (used as a fill-distance proxy).
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn fill_distance_estimate(&self) -> f64 {
        self.min_separation
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for x in self.nodes() {
            for (ck, xk) in c.iter_mut().zip(x) {
                *ck += xk;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        self.nodes()
            .enumerate()
            .map(|(i, y)| (i, crate::kernels::distance(x, y)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
            .0
    }
}

/// `I - n n^T` for a unit vector `n`.
pub fn projection_matrix(n: &[f64]) -> DMatrix<f64> {
    let d = n.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - n[i] * n[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn torus_outer_equator_is_on_surface() {
        let t = Surface::torus();
        assert!(t.eval(&[4.0 / 3.0, 0.0, 0.0]).unwrap().abs() < 1e-14);
        assert!(t.eval(&[2.0 / 3.0, 0.0, 0.0]).unwrap().abs() < 1e-14);
        assert!(t.eval(&[1.0, 0.0, 1.0 / 3.0]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let x = [0.31, -0.42, 0.17];
        for s in [Surface::sphere(), Surface::torus(), Surface::cyclide(), Surface::bretzel2()] {
            let f = s.implicit_fn.clone().unwrap();
            let fd = Surface::implicit("fd", 3, f, None, None, None).unwrap();
            let (ga, gf) = (s.gradient(&x).unwrap(), fd.gradient(&x).unwrap());
            for k in 0..3 {
                assert!((ga[k] - gf[k]).abs() < 1e-7 * (1.0 + ga[k].abs()), "{} grad", s.name);
            }
            let (ha, hf) = (s.hessian(&x).unwrap(), fd.hessian(&x).unwrap());
            assert!((ha - hf).amax() < 1e-4, "{} hessian", s.name);
        }
    }

    #[test]
    fn duplicate_nodes_rejected() {
        assert!(PointCloud::new(2, vec![1.0, 0.0, 1.0, 0.0]).is_err());
        assert!(PointCloud::new(2, vec![1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn unknown_surface_name() {
        assert!(Surface::by_name("klein").is_err());
        assert_eq!(Surface::by_name("torus").unwrap().codim(), 1);
    }

    proptest! {
        #[test]
        fn projection_identities(v in prop::array::uniform3(-1.0f64..1.0)) {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let n: Vec<f64> = v.iter().map(|a| a / norm).collect();
            let p = projection_matrix(&n);
            let nv = nalgebra::DVector::from_vec(n.clone());
            prop_assert!((&p * &p - &p).amax() <= 1e-12);
            prop_assert!((&p - p.transpose()).amax() <= 1e-12);
            prop_assert!((&p * nv).amax() <= 1e-12);
            prop_assert!((p.trace() - 2.0).abs() <= 1e-12);
        }
    }
}
