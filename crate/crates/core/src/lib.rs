#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discovery;
pub mod error;
pub mod features;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod recipes;
pub mod regression;
pub mod solver;

pub use discovery::{RegressionSettings, Snapshots, SparseModel};
pub use error::{Error, Result};
pub use features::FeatureMap;
pub use geometry::{PointCloud, Surface};
pub use kernels::KernelSpec;
pub use operators::{build_operators, DiscreteOperators};
pub use solver::{ForwardProblem, Trajectory};
