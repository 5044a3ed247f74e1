use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use nalgebra::{DMatrix, DVector};

/// Samples `u(X, t_j)` and forcing `f(X, t_j)` at `t_j = j dt`, `j = 0..=M`.
/// Stored column-per-time: `values[(i, j)] = u(x_i, t_j)`.
#[derive(Clone, Debug)]
pub struct Snapshots {
    cloud: PointCloud,
    dt: f64,
    values: DMatrix<f64>,
    forcing: DMatrix<f64>,
}

impl Snapshots {
    pub fn new(cloud: PointCloud, dt: f64, values: DMatrix<f64>, forcing: DMatrix<f64>) -> Result<Snapshots> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let n = cloud.len();
        if values.nrows() != n || forcing.shape() != values.shape() {
            return Err(Error::invalid(format!(
                "snapshot shapes {:?} / {:?} do not match {n} nodes",
                values.shape(),
                forcing.shape()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InsufficientSnapshots(0));
        }
        if values.iter().chain(forcing.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("snapshot data must be finite"));
        }
        Ok(Snapshots { cloud, dt, values, forcing })
    }

    /// Builds snapshots by sampling `u(x, t)` and `f(x, t)` for `j = 0..=steps`.
    pub fn sample(
        cloud: PointCloud,
        dt: f64,
        steps: usize,
        u: impl Fn(&[f64], f64) -> f64,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Snapshots> {
        let n = cloud.len();
        let values = DMatrix::from_fn(n, steps + 1, |i, j| u(cloud.node(i), j as f64 * dt));
        let forcing = DMatrix::from_fn(n, steps + 1, |i, j| f(cloud.node(i), j as f64 * dt));
        Snapshots::new(cloud, dt, values, forcing)
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps `M`; there are `M + 1` time levels.
    pub fn steps(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn forcing(&self) -> &DMatrix<f64> {
        &self.forcing
    }

    pub fn snapshot(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    pub fn forcing_at(&self, j: usize) -> DVector<f64> {
        self.forcing.column(j).into_owned()
    }
}
