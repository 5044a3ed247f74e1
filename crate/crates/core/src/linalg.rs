//! Dense factorization helpers shared by the interpolation systems.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Diagonal jitter levels, as multiples of `trace / N`.
pub const JITTER_LEVELS: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// A symmetric positive definite matrix together with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    condition_estimate: f64,
}

impl SpdFactor {
    /// Factorizes `matrix`, escalating the diagonal jitter through
    /// [`JITTER_LEVELS`] until the factorization succeeds.
    pub fn new(matrix: DMatrix<f64>) -> Result<SpdFactor> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(Error::invalid("factorization needs a non-empty square matrix"));
        }
        let scale = matrix.trace() / n as f64;
        let mut last_jitter = 0.0;
        for level in JITTER_LEVELS {
            let jitter = level * scale;
            last_jitter = jitter;
            let mut m = matrix.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(chol) = m.cholesky() {
                let diag = chol.l_dirty().diagonal();
                let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                if lo > 0.0 && lo.is_finite() {
                    return Ok(SpdFactor { chol, jitter, condition_estimate: (hi / lo).powi(2) });
                }
            }
        }
        Err(Error::IllConditioned { condition_estimate: condition_number_estimate(&matrix), jitter: last_jitter })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower bound on the 2-norm condition number from the Cholesky pivots.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mut(&self, b: &mut DMatrix<f64>) {
        self.chol.solve_mut(b)
    }
}

/// Spectral condition number for moderate sizes; infinity when the matrix is
/// too large to decompose cheaply or is numerically singular.
fn condition_number_estimate(matrix: &DMatrix<f64>) -> f64 {
    if matrix.nrows() > 1500 {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let (lo, hi) =
        eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Least-squares solution of `a x = b` through an SVD with a relative
/// singular-value cutoff.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-14 * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps).map_err(|e| Error::NonFinite(format!("least squares failed: {e}")))
}
