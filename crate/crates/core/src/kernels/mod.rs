//! Restricted Whittle–Matérn–Sobolev and Gaussian kernels.
//!
//! The Matérn kernel is used unnormalized, `phi(r) = r^nu K_nu(r)` with
//! `nu = tau - d/2`; an overall scale cancels out of every interpolation
//! system built from it.

mod bessel;

pub use bessel::{bessel_k, Order};

use crate::error::{Error, Result};
use bessel::bessel_k_order;

/// Exponent convention for the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianExponent {
    /// `exp(-|x-y|^2 / sigma2)`
    SquaredNorm,
    /// `exp(-|x-y| / sigma2)`
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Surface smoothness `m` and codimension `d_co`; `tau = m + d_co/2`.
    MaternSobolev {
        m: f64,
        codim: usize,
    },
    Gaussian {
        sigma2: f64,
        exponent: GaussianExponent,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub ambient_dim: usize,
    // cached Bessel order for the Matérn family
    order: Option<Order>,
}

impl KernelSpec {
    /// Matérn–Sobolev kernel reproducing `H^m` on a surface of codimension
    /// `codim` in `R^ambient_dim`.
    pub fn matern(ambient_dim: usize, codim: usize, m: f64) -> Result<KernelSpec> {
        if ambient_dim == 0 || codim == 0 || codim >= ambient_dim {
            return Err(Error::invalid(format!("need 1 <= codim < ambient_dim, got codim {codim}, d {ambient_dim}")));
        }
        let tau = m + codim as f64 / 2.0;
        let nu = tau - ambient_dim as f64 / 2.0;
        if nu <= 0.0 {
            return Err(Error::invalid(format!("Matérn kernel needs tau > d/2 (tau = {tau}, d = {ambient_dim})")));
        }
        let order = Order::classify(nu)?;
        Ok(KernelSpec { family: KernelFamily::MaternSobolev { m, codim }, ambient_dim, order: Some(order) })
    }

    pub fn gaussian(ambient_dim: usize, sigma2: f64) -> Result<KernelSpec> {
        Self::gaussian_with(ambient_dim, sigma2, GaussianExponent::SquaredNorm)
    }

    pub fn gaussian_with(ambient_dim: usize, sigma2: f64, exponent: GaussianExponent) -> Result<KernelSpec> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid(format!("Gaussian shape must be positive, got {sigma2}")));
        }
        Ok(KernelSpec { family: KernelFamily::Gaussian { sigma2, exponent }, ambient_dim, order: None })
    }

    /// Ambient Sobolev order `tau` (Matérn only).
    pub fn tau(&self) -> Option<f64> {
        match self.family {
            KernelFamily::MaternSobolev { m, codim } => Some(m + codim as f64 / 2.0),
            KernelFamily::Gaussian { .. } => None,
        }
    }

    /// Surface smoothness `m`; Gaussian kernels are treated as infinitely smooth.
    pub fn smoothness(&self) -> f64 {
        match self.family {
            KernelFamily::MaternSobolev { m, .. } => m,
            KernelFamily::Gaussian { .. } => f64::INFINITY,
        }
    }

    /// Bessel order `nu = tau - d/2` (Matérn only).
    pub fn nu(&self) -> Option<f64> {
        self.order.map(Order::value)
    }

    /// Radial profile `phi(r)`.
    pub fn radial(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::MaternSobolev { .. } => {
                let order = self.order.expect("matern order");
                let nu = order.value();
                if r == 0.0 {
                    matern_origin_value(nu)
                } else {
                    r.powf(nu) * bessel_k_order(order, r)
                }
            }
            KernelFamily::Gaussian { sigma2, exponent } => match exponent {
                GaussianExponent::SquaredNorm => (-r * r / sigma2).exp(),
                GaussianExponent::Norm => (-r / sigma2).exp(),
            },
        }
    }

    /// `phi'(r) / r`, the factor multiplying `x - y` in the ambient gradient.
    /// Defined by its limit at `r = 0` where that limit exists.
    fn radial_derivative_over_r(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::MaternSobolev { .. } => {
                // d/dr [r^nu K_nu(r)] = -r^nu K_{nu-1}(r)
                let nu = self.order.expect("matern order").value();
                let lower = nu - 1.0;
                let lower_order = Order::classify(lower.abs()).expect("order step");
                if r == 0.0 {
                    -matern_origin_value(lower)
                } else {
                    -r.powf(lower) * bessel_k_order(lower_order, r)
                }
            }
            KernelFamily::Gaussian { sigma2, exponent } => match exponent {
                GaussianExponent::SquaredNorm => -2.0 / sigma2 * (-r * r / sigma2).exp(),
                GaussianExponent::Norm => {
                    if r == 0.0 {
                        0.0
                    } else {
                        -(-r / sigma2).exp() / (sigma2 * r)
                    }
                }
            },
        }
    }

    /// Whether the ambient gradient is continuous at coincident points.
    pub fn has_gradient(&self) -> bool {
        match self.family {
            KernelFamily::MaternSobolev { .. } => self.nu().unwrap_or(0.0) > 1.0,
            KernelFamily::Gaussian { exponent, .. } => exponent == GaussianExponent::SquaredNorm,
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.radial(distance(x, y))
    }

    /// Ambient gradient in the first argument, written into `out`.
    pub fn gradient_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let r = distance(x, y);
        if r == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let s = self.radial_derivative_over_r(r);
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = s * (a - b);
        }
    }

    /// `grad_x Phi(x, y)`; fails when the kernel is not differentiable at
    /// coincident points.
    pub fn gradient_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.require_gradient()?;
        let mut out = vec![0.0; x.len()];
        self.gradient_x_into(x, y, &mut out);
        Ok(out)
    }

    pub(crate) fn require_gradient(&self) -> Result<()> {
        if self.has_gradient() {
            Ok(())
        } else {
            Err(Error::UnsupportedSmoothness(format!(
                "kernel {:?} has no continuous gradient at the origin (needs nu > 1)",
                self.family
            )))
        }
    }
}

/// `lim_{r->0} r^nu K_nu(r) = 2^{nu-1} Gamma(nu)` for `nu > 0`.
fn matern_origin_value(nu: f64) -> f64 {
    2f64.powf(nu - 1.0) * half_integer_gamma(nu)
}

/// Exact `Gamma(nu)` for positive integer and half-integer `nu`.
fn half_integer_gamma(nu: f64) -> f64 {
    let mut x = nu;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Free-function form of [`KernelSpec::value`].
pub fn kernel_value(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    spec.value(x, y)
}

/// Free-function form of [`KernelSpec::gradient_x`].
pub fn kernel_gradient_x(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    spec.gradient_x(x, y)
}
