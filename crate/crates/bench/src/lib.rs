//! Shared fixtures for the criterion benches.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfpde::recipes::{self, NormalMode};
use surfpde::regression::RegressionProblem;
use surfpde::PointCloud;

/// `n` sphere nodes with analytic normals.
pub fn sphere_cloud(n: usize) -> PointCloud {
    recipes::ex1_sphere(n, NormalMode::Analytic, 0.0, 0).expect("sphere fixture").cloud
}

/// A seeded random `rows x terms` problem with a 3-sparse truth.
pub fn sparse_problem(rows: usize, terms: usize, mu: f64) -> RegressionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let design = DMatrix::from_fn(rows, terms, |_, _| rng.random_range(-1.0..1.0));
    let truth = DVector::from_fn(terms, |j, _| match j {
        0 => 1.5,
        3 => -0.75,
        5 => 0.25,
        _ => 0.0,
    });
    let target = &design * truth;
    RegressionProblem::new(design, target, mu).expect("finite fixture").normalized(true)
}
