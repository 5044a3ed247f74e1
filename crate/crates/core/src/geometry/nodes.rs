use super::{PointCloud, Surface};
use crate::error::{Error, Result};
use crate::kernels::distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const NEWTON_MAX_ITER: usize = 100;
const ON_SURFACE_TOL: f64 = 1e-10;
const CANDIDATE_FACTOR: usize = 8;
const MIN_CANDIDATES: usize = 4000;

/// `N` equally spaced nodes `(cos 2 pi i/N, sin 2 pi i/N)` on the unit circle,
/// with normals equal to the positions.
pub fn circle_nodes(n: usize) -> Result<PointCloud> {
    if n < 3 {
        return Err(Error::invalid(format!("circle needs at least 3 nodes, got {n}")));
    }
    let mut coords = Vec::with_capacity(2 * n);
    for i in 0..n {
        let theta = 2.0 * PI * i as f64 / n as f64;
        coords.push(theta.cos());
        coords.push(theta.sin());
    }
    let normals = coords.clone();
    PointCloud::new(2, coords)?.with_normals(normals)
}

/// `N` quasi-uniform nodes on the unit sphere from the Fibonacci lattice.
pub fn sphere_nodes(n: usize) -> Result<PointCloud> {
    if n < 4 {
        return Err(Error::invalid(format!("sphere needs at least 4 nodes, got {n}")));
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    let mut coords = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = 1.0 - (2 * i + 1) as f64 / n as f64;
        let rho = (1.0 - z * z).sqrt();
        let phi = golden_angle * i as f64;
        let p = [rho * phi.cos(), rho * phi.sin(), z];
        // renormalize so |x| = 1 holds to the last bit we can get
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        coords.extend(p.iter().map(|v| v / norm));
    }
    let normals = coords.clone();
    PointCloud::new(3, coords)?.with_normals(normals)
}

/// Seeded node generation on an implicit surface: uniform candidates in the
/// bounding box, Newton projection along `grad F`, then farthest-point
/// thinning down to `n` nodes.
pub fn implicit_surface_nodes(surface: &Surface, n: usize, seed: u64) -> Result<PointCloud> {
    if !surface.has_implicit() {
        return Err(Error::invalid(format!("surface '{}' has no implicit function", surface.name)));
    }
    if n < 10 {
        return Err(Error::invalid(format!("implicit node generation needs N >= 10, got {n}")));
    }
    let (lo, hi) = surface
        .bounds
        .clone()
        .ok_or_else(|| Error::invalid(format!("surface '{}' has no bounding box for sampling", surface.name)))?;
    let d = surface.ambient_dim;
    let diag = distance(&lo, &hi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = (CANDIDATE_FACTOR * n).max(MIN_CANDIDATES);
    let mut candidates: Vec<f64> = Vec::with_capacity(attempts * d);
    let mut x = vec![0.0; d];
    for _ in 0..attempts {
        for k in 0..d {
            x[k] = rng.random_range(lo[k]..hi[k]);
        }
        if project_to_surface(surface, &mut x, diag) {
            candidates.extend_from_slice(&x);
        }
    }
    let survivors = candidates.len() / d;
    if survivors < n {
        return Err(Error::GenerationFailure(format!(
            "only {survivors} of {attempts} candidates projected onto '{}', need {n}",
            surface.name
        )));
    }
    let chosen = farthest_point_sample(&candidates, d, n);
    let mut coords = Vec::with_capacity(n * d);
    for i in chosen {
        coords.extend_from_slice(&candidates[i * d..(i + 1) * d]);
    }
    PointCloud::new(d, coords)
}

/// Newton iteration `x <- x - F(x) grad F / |grad F|^2`. Returns whether the
/// point converged onto the surface.
fn project_to_surface(surface: &Surface, x: &mut [f64], max_travel: f64) -> bool {
    let start = x.to_vec();
    for _ in 0..NEWTON_MAX_ITER {
        let f = surface.eval(x).expect("implicit");
        let g = surface.gradient(x).expect("gradient");
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if !(g2 > 1e-24) || !f.is_finite() {
            return false;
        }
        let step = f / g2;
        let mut moved = 0.0;
        for (xk, gk) in x.iter_mut().zip(&g) {
            *xk -= step * gk;
            moved += (step * gk) * (step * gk);
        }
        if distance(x, &start) > max_travel {
            return false;
        }
        if moved.sqrt() < 1e-15 * (1.0 + x.iter().map(|v| v.abs()).sum::<f64>()) {
            break;
        }
    }
    surface.eval(x).is_some_and(|f| f.abs() <= ON_SURFACE_TOL)
}

/// Greedy farthest-point selection starting from candidate 0. Ties go to
/// the lowest index so the selection is deterministic.
fn farthest_point_sample(points: &[f64], d: usize, n: usize) -> Vec<usize> {
    let m = points.len() / d;
    let mut chosen = Vec::with_capacity(n);
    let mut min_dist = vec![f64::INFINITY; m];
    let mut current = 0;
    for _ in 0..n {
        chosen.push(current);
        let c = &points[current * d..(current + 1) * d];
        let mut best = (0, -1.0);
        for j in 0..m {
            let r = distance(c, &points[j * d..(j + 1) * d]);
            if r < min_dist[j] {
                min_dist[j] = r;
            }
            if min_dist[j] > best.1 {
                best = (j, min_dist[j]);
            }
        }
        current = best.0;
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_circle_nodes_are_axis_points() {
        let c = circle_nodes(4).unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (i, w) in want.iter().enumerate() {
            assert!((c.node(i)[0] - w[0]).abs() < 1e-15 && (c.node(i)[1] - w[1]).abs() < 1e-15);
        }
        assert!(circle_nodes(2).is_err());
    }

    #[test]
    fn circle_nodes_on_unit_circle() {
        let c = circle_nodes(100).unwrap();
        for x in c.nodes() {
            assert!((x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-15);
        }
        // index 15 sits at angle 2 pi 15 / 100
        assert!((c.node(15)[0] - 0.5878).abs() < 1e-4 && (c.node(15)[1] - 0.8090).abs() < 1e-4);
    }

    #[test]
    fn sphere_nodes_unit_norm_and_separated() {
        for &n in &[100, 1000] {
            let s = sphere_nodes(n).unwrap();
            for x in s.nodes() {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                assert!((r2.sqrt() - 1.0).abs() < 1e-15);
            }
        }
        // brute-force pairwise scan
        let s = sphere_nodes(100).unwrap();
        let mut min = f64::INFINITY;
        for i in 0..100 {
            for j in i + 1..100 {
                min = min.min(distance(s.node(i), s.node(j)));
            }
        }
        assert!(min > 0.8 * (4.0 * PI / 100.0).sqrt(), "min separation {min}");
        assert_eq!(min, s.min_separation());
    }

    #[test]
    fn sphere_separation_scales_like_inverse_sqrt_n() {
        let a = sphere_nodes(100).unwrap().min_separation();
        let b = sphere_nodes(1000).unwrap().min_separation();
        let ratio = a / b;
        assert!((ratio - 10f64.sqrt()).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn implicit_nodes_lie_on_surface_and_are_deterministic() {
        for s in [Surface::torus(), Surface::bretzel2(), Surface::cyclide()] {
            let a = implicit_surface_nodes(&s, 200, 3).unwrap();
            for x in a.nodes() {
                assert!(s.eval(x).unwrap().abs() <= 1e-10, "{}", s.name);
            }
            let b = implicit_surface_nodes(&s, 200, 3).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn implicit_nodes_preconditions() {
        assert!(implicit_surface_nodes(&Surface::torus(), 5, 0).is_err());
        let bare = Surface::point_cloud_only("blob", 3);
        assert!(implicit_surface_nodes(&bare, 100, 0).is_err());
    }
}
