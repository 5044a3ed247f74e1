//! Unit normals: analytic, local-PCA estimates, and the RBF normal extension.

use super::{PointCloud, Surface};
use crate::error::{Error, Result};
use crate::kernels::{distance, KernelSpec};
use crate::linalg::SpdFactor;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default neighborhood size for [`rough_normals`].
pub const DEFAULT_NEIGHBORS: usize = 12;

/// Fraction of the minimum node separation used as the default offset.
const DEFAULT_OFFSET_FRACTION: f64 = 0.45;

/// Normals `grad F / |grad F|` from the implicit function, oriented outward.
pub fn analytic_normals(surface: &Surface, cloud: &PointCloud) -> Result<PointCloud> {
    if !surface.has_implicit() {
        return Err(Error::invalid(format!("surface '{}' has no implicit function", surface.name)));
    }
    let d = cloud.dim();
    let mut normals = Vec::with_capacity(cloud.len() * d);
    for (i, x) in cloud.nodes().enumerate() {
        let g = surface.gradient(x).expect("implicit surface gradient");
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= 1e-12) {
            return Err(Error::SingularGradient { index: i, norm });
        }
        normals.extend(g.iter().map(|v| v / norm));
    }
    orient_outward(cloud, &mut normals, &all_nodes(cloud.len()));
    cloud.clone().with_normals(normals)
}

/// Local-PCA normals over the `k` nearest neighbours, with signs made
/// consistent along the neighbour graph and each connected piece oriented
/// away from its centroid.
pub fn rough_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    let n = cloud.len();
    let d = cloud.dim();
    if !(n > k && k >= d) {
        return Err(Error::invalid(format!("rough normals need N > k >= d (N={n}, k={k}, d={d})")));
    }
    let neighbors = k_nearest(cloud, k);
    let mut normals = Vec::with_capacity(n * d);
    for (i, near) in neighbors.iter().enumerate() {
        let idx: Vec<usize> = std::iter::once(i).chain(near.iter().copied()).collect();
        let mut mean = vec![0.0; d];
        for &j in &idx {
            for (m, x) in mean.iter_mut().zip(cloud.node(j)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for &j in &idx {
            let x = cloud.node(j);
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let largest = eig.eigenvalues[order[d - 1]];
        // tangent directions must span d-1 dimensions
        if !(largest > 0.0) || eig.eigenvalues[order[1]] <= 1e-12 * largest {
            return Err(Error::IllConditionedNeighborhood { index: i });
        }
        let v = eig.eigenvectors.column(order[0]);
        normals.extend(v.iter().copied());
    }
    propagate_signs(cloud, &neighbors, &mut normals);
    cloud.clone().with_normals(normals)
}

/// `0.45` times the minimum node separation; keeps the offset points of
/// neighbouring nodes from colliding.
pub fn default_offset(cloud: &PointCloud) -> f64 {
    DEFAULT_OFFSET_FRACTION * cloud.min_separation()
}

/// Implicit level-set function
/// `s(x) = sum_i alpha_i Phi(x, x_i) + beta_i Phi(x, x_i - delta n_i) + zeta_i Phi(x, x_i + delta n_i)`
/// interpolating `0`, `-1` and `+1` on the three center sets.
#[derive(Clone, Debug)]
pub struct LevelSetModel {
    dim: usize,
    centers: Vec<f64>,
    coefficients: Vec<f64>,
    pub kernel: KernelSpec,
    pub delta: f64,
    pub jitter: f64,
    pub condition_estimate: f64,
}

impl LevelSetModel {
    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks(self.dim)
    }

    /// Coefficients ordered `[alpha; beta; zeta]`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers().zip(&self.coefficients).map(|(c, w)| w * self.kernel.value(x, c)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        let mut tmp = vec![0.0; self.dim];
        for (c, w) in self.centers().zip(&self.coefficients) {
            self.kernel.gradient_x_into(x, c, &mut tmp);
            for (gk, tk) in g.iter_mut().zip(&tmp) {
                *gk += w * tk;
            }
        }
        g
    }

    /// Largest deviation from the prescribed values `{0, -1, +1}` at the centers.
    pub fn interpolation_residual(&self) -> f64 {
        let n = self.centers.len() / self.dim / 3;
        self.centers()
            .enumerate()
            .map(|(i, c)| {
                let target = match i / n {
                    0 => 0.0,
                    1 => -1.0,
                    _ => 1.0,
                };
                (self.eval(c) - target).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Fits the level-set function over the nodes and their `±delta` offsets
/// along the rough normals, then returns `grad s / |grad s|` at each node,
/// oriented to agree with the rough normals.
pub fn normal_extension(rough: &PointCloud, delta: f64, kernel: &KernelSpec) -> Result<(LevelSetModel, PointCloud)> {
    let rough_normals = rough.normals().ok_or_else(|| Error::invalid("normal extension needs rough normals"))?;
    if !(delta > 0.0) || delta >= 0.5 * rough.min_separation() {
        return Err(Error::invalid(format!(
            "offset delta = {delta} must lie in (0, {}) (half the minimum node separation)",
            0.5 * rough.min_separation()
        )));
    }
    if kernel.ambient_dim != rough.dim() {
        return Err(Error::invalid("kernel and cloud dimensions differ"));
    }
    kernel.require_gradient()?;
    let n = rough.len();
    let d = rough.dim();
    let mut centers = Vec::with_capacity(3 * n * d);
    centers.extend_from_slice(rough.coordinates());
    for sign in [-1.0, 1.0] {
        for (x, nrm) in rough.nodes().zip(rough_normals.chunks(d)) {
            centers.extend(x.iter().zip(nrm).map(|(a, b)| a + sign * delta * b));
        }
    }
    let m = 3 * n;
    let center = |i: usize| &centers[i * d..(i + 1) * d];
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            let v = kernel.value(center(i), center(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let factor = SpdFactor::new(gram)?;
    let mut rhs = DVector::<f64>::zeros(m);
    for i in 0..n {
        rhs[n + i] = -1.0;
        rhs[2 * n + i] = 1.0;
    }
    let coefficients = factor.solve_vec(&rhs);
    let model = LevelSetModel {
        dim: d,
        centers,
        coefficients: coefficients.as_slice().to_vec(),
        kernel: *kernel,
        delta,
        jitter: factor.jitter(),
        condition_estimate: factor.condition_estimate(),
    };
    let mut normals = Vec::with_capacity(n * d);
    for (i, x) in rough.nodes().enumerate() {
        let g = model.gradient(x);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SingularGradient { index: i, norm });
        }
        let r = &rough_normals[i * d..(i + 1) * d];
        let agree: f64 = g.iter().zip(r).map(|(a, b)| a * b).sum();
        let sign = if agree < 0.0 { -1.0 } else { 1.0 };
        normals.extend(g.iter().map(|v| sign * v / norm));
    }
    let refined = rough.clone().with_normals(normals)?;
    Ok((model, refined))
}

fn all_nodes(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Flips every normal in `component` when, on balance, they point toward
/// the component's centroid.
fn orient_outward(cloud: &PointCloud, normals: &mut [f64], component: &[usize]) {
    let d = cloud.dim();
    let mut c = vec![0.0; d];
    for &i in component {
        for (ck, xk) in c.iter_mut().zip(cloud.node(i)) {
            *ck += xk;
        }
    }
    c.iter_mut().for_each(|v| *v /= component.len() as f64);
    let score: f64 = component
        .iter()
        .map(|&i| {
            let x = cloud.node(i);
            (0..d).map(|k| normals[i * d + k] * (x[k] - c[k])).sum::<f64>()
        })
        .sum();
    if score < 0.0 {
        for &i in component {
            normals[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = -*v);
        }
    }
}

fn k_nearest(cloud: &PointCloud, k: usize) -> Vec<Vec<usize>> {
    let n = cloud.len();
    (0..n)
        .map(|i| {
            let xi = cloud.node(i);
            let mut dist: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| (distance(xi, cloud.node(j)), j)).collect();
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut nearest: Vec<(f64, usize)> = dist[..k].to_vec();
            nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            nearest.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

#[derive(PartialEq)]
struct Edge {
    weight: f64,
    from: usize,
    to: usize,
}

impl Eq for Edge {}

impl Ord for Edge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.to.cmp(&self.to))
            .then_with(|| other.from.cmp(&self.from))
    }
}

impl PartialOrd for Edge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Prim-style traversal of the symmetrized neighbour graph, always crossing
/// the edge whose normals are most parallel, flipping signs to agree.
fn propagate_signs(cloud: &PointCloud, neighbors: &[Vec<usize>], normals: &mut [f64]) {
    let n = cloud.len();
    let d = cloud.dim();
    let mut adjacency: Vec<Vec<usize>> = neighbors.to_vec();
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            if !adjacency[j].contains(&i) {
                adjacency[j].push(i);
            }
        }
    }
    let dot =
        |normals: &[f64], i: usize, j: usize| -> f64 { (0..d).map(|k| normals[i * d + k] * normals[j * d + k]).sum() };
    let mut visited = vec![false; n];
    for root in 0..n {
        if visited[root] {
            continue;
        }
        let mut component = vec![root];
        visited[root] = true;
        let mut heap = BinaryHeap::new();
        for &j in &adjacency[root] {
            heap.push(Edge { weight: dot(normals, root, j).abs(), from: root, to: j });
        }
        while let Some(Edge { from, to, .. }) = heap.pop() {
            if visited[to] {
                continue;
            }
            visited[to] = true;
            component.push(to);
            if dot(normals, from, to) < 0.0 {
                normals[to * d..(to + 1) * d].iter_mut().for_each(|v| *v = -*v);
            }
            for &j in &adjacency[to] {
                if !visited[j] {
                    heap.push(Edge { weight: dot(normals, to, j).abs(), from: to, to: j });
                }
            }
        }
        orient_outward(cloud, normals, &component);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circle_nodes, sphere_nodes};

    fn max_angle_defect(a: &PointCloud, b: &PointCloud) -> f64 {
        (0..a.len())
            .map(|i| {
                let dot: f64 = a.normal(i).unwrap().iter().zip(b.normal(i).unwrap()).map(|(x, y)| x * y).sum();
                1.0 - dot
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn analytic_sphere_normal_and_projection_at_pole() {
        let cloud = PointCloud::from_points(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, -1.0],
        ])
        .unwrap();
        let c = analytic_normals(&Surface::sphere(), &cloud).unwrap();
        assert_eq!(c.normal(0).unwrap(), &[0.0, 0.0, 1.0]);
        let p = c.projection(0).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!((p - want).amax() < 1e-15);
    }

    #[test]
    fn analytic_torus_normal_at_outer_equator() {
        let cloud = PointCloud::from_points(&[
            vec![4.0 / 3.0, 0.0, 0.0],
            vec![-4.0 / 3.0, 0.0, 0.0],
            vec![0.0, 4.0 / 3.0, 0.0],
            vec![0.0, -2.0 / 3.0, 0.0],
        ])
        .unwrap();
        let c = analytic_normals(&Surface::torus(), &cloud).unwrap();
        let n = c.normal(0).unwrap();
        assert!((n[0] - 1.0).abs() < 1e-15 && n[1].abs() < 1e-15 && n[2].abs() < 1e-15);
        // the inner equator normal points into the hole
        assert!(c.normal(3).unwrap()[1] > 0.99);
    }

    #[test]
    fn singular_gradient_is_reported() {
        let cloud = PointCloud::from_points(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(analytic_normals(&Surface::sphere(), &cloud), Err(Error::SingularGradient { index: 0, .. })));
    }

    #[test]
    fn rough_sphere_normals_close_to_analytic() {
        let cloud = sphere_nodes(400).unwrap();
        let rough = rough_normals(&cloud, DEFAULT_NEIGHBORS).unwrap();
        let worst = (0..cloud.len())
            .map(|i| {
                let x = cloud.node(i);
                rough.normal(i).unwrap().iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(worst > 0.99, "min n.x = {worst}");
    }

    #[test]
    fn rough_normals_exact_on_plane() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                let (u, v) = (i as f64 * 0.1, j as f64 * 0.13);
                // plane spanned by (1,1,0)/sqrt2 and (0,0,1)
                pts.push(vec![u, u, v]);
            }
        }
        let cloud = PointCloud::from_points(&pts).unwrap();
        let rough = rough_normals(&cloud, 8).unwrap();
        let s = 0.5f64.sqrt();
        for i in 0..cloud.len() {
            let n = rough.normal(i).unwrap();
            assert!((n[0] * s + n[1] * s).abs() < 1e-12);
            assert!(n[2].abs() < 1e-12);
        }
    }

    #[test]
    fn rough_normals_full_neighborhood_still_unit() {
        let cloud = sphere_nodes(30).unwrap();
        let rough = rough_normals(&cloud, 29).unwrap();
        for i in 0..30 {
            let n = rough.normal(i).unwrap();
            assert!((n.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(rough_normals(&cloud, 30).is_err());
        assert!(rough_normals(&cloud, 2).is_err());
    }

    #[test]
    fn colinear_neighborhood_is_degenerate() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        assert!(matches!(rough_normals(&cloud, 4), Err(Error::IllConditionedNeighborhood { .. })));
    }

    #[test]
    fn normal_extension_recovers_sphere_normals() {
        let cloud = sphere_nodes(200).unwrap();
        let rough = rough_normals(&cloud, DEFAULT_NEIGHBORS).unwrap();
        let kernel = KernelSpec::matern(3, 1, 4.0).unwrap();
        let (model, refined) = normal_extension(&rough, 0.1, &kernel).unwrap();
        assert!(max_angle_defect(&refined, &cloud) < 1e-3);
        assert!(model.interpolation_residual() < 1e-8, "{}", model.interpolation_residual());
    }

    #[test]
    fn normal_extension_with_exact_normals_interpolates() {
        let cloud = circle_nodes(40).unwrap();
        let kernel = KernelSpec::matern(2, 1, 4.0).unwrap();
        let delta = default_offset(&cloud);
        let (model, refined) = normal_extension(&cloud, delta, &kernel).unwrap();
        for x in cloud.nodes() {
            assert!(model.eval(x).abs() <= 1e-8);
        }
        assert!(max_angle_defect(&refined, &cloud) < 1e-6);
    }

    #[test]
    fn normal_extension_error_shrinks_with_n() {
        let kernel = KernelSpec::matern(3, 1, 4.0).unwrap();
        let errs: Vec<f64> = [100, 200, 500]
            .iter()
            .map(|&n| {
                let cloud = sphere_nodes(n).unwrap();
                let (_, refined) = normal_extension(&cloud, default_offset(&cloud), &kernel).unwrap();
                max_angle_defect(&refined, &cloud)
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn offset_must_respect_separation() {
        let cloud = sphere_nodes(100).unwrap();
        let kernel = KernelSpec::matern(3, 1, 4.0).unwrap();
        let too_big = 0.5 * cloud.min_separation();
        assert!(matches!(normal_extension(&cloud, too_big, &kernel), Err(Error::InvalidArgument(_))));
        assert!(normal_extension(&cloud, 0.0, &kernel).is_err());
    }
}
