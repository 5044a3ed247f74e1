//! Modified Bessel function of the second kind for integer and half-integer
//! orders.
//!
//! Half-integer orders use the terminating closed form. Integer orders start
//! from `K_0` and `K_1` (power series for `x <= 2`, Steed's continued fraction
//! above) and recur upward, which is stable for `K`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_CROSSOVER: f64 = 2.0;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Order of a supported Bessel function: `n` or `n + 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Integer(u32),
    HalfInteger(u32),
}

impl Order {
    /// Classifies a non-negative real order.
    pub fn classify(nu: f64) -> Result<Order> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::UnsupportedOrder(nu));
        }
        let twice = 2.0 * nu;
        if (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::UnsupportedOrder(nu));
        }
        let twice = twice.round() as u32;
        Ok(if twice % 2 == 0 { Order::Integer(twice / 2) } else { Order::HalfInteger(twice / 2) })
    }

    pub fn value(self) -> f64 {
        match self {
            Order::Integer(n) => n as f64,
            Order::HalfInteger(n) => n as f64 + 0.5,
        }
    }
}

/// `K_nu(x)` for `nu` a non-negative integer or half-integer and `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let order = Order::classify(nu)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("bessel_k requires x > 0, got {x}")));
    }
    Ok(bessel_k_order(order, x))
}

/// Infallible evaluation once the order and argument have been validated.
pub(crate) fn bessel_k_order(order: Order, x: f64) -> f64 {
    match order {
        Order::HalfInteger(n) => k_half_integer(n, x),
        Order::Integer(n) => k_integer(n, x),
    }
}

/// `K_{n+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_{k=0}^{n} (n+k)! / (k! (n-k)! (2x)^k)`.
fn k_half_integer(n: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let two_x = 2.0 * x;
    for k in 1..=n {
        // ratio of consecutive terms: (n+k)(n-k+1) / (k (2x))
        term *= ((n + k) as f64) * ((n - k + 1) as f64) / (k as f64 * two_x);
        sum += term;
    }
    (PI / two_x).sqrt() * (-x).exp() * sum
}

fn k_integer(n: u32, x: f64) -> f64 {
    let (k0, k1) = if x <= SERIES_CROSSOVER { k01_series(x) } else { k01_continued_fraction(x) };
    match n {
        0 => k0,
        1 => k1,
        _ => {
            let (mut km1, mut k) = (k0, k1);
            for j in 1..n {
                let next = km1 + 2.0 * j as f64 / x * k;
                km1 = k;
                k = next;
            }
            k
        }
    }
}

/// Power series for `K_0` and `K_1`, accurate for small arguments.
fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // I0, and the harmonic-weighted companion sum for K0
    let mut t = 1.0;
    let mut i0 = 1.0;
    let mut s0 = 0.0;
    let mut harmonic = 0.0;
    // I1 / (x/2), and the digamma-weighted sum for K1
    let mut u = 1.0;
    let mut i1 = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // psi(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // psi(k+2)
    let mut s1 = psi_k1 + psi_k2;
    for k in 1..200 {
        let kf = k as f64;
        t *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += t;
        s0 += t * harmonic;

        u *= q / (kf * (kf + 1.0));
        i1 += u;
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        s1 += u * (psi_k1 + psi_k2);
        if t < EPS * i0 && u < EPS * i1 {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + 0.5 * x * i1 * log_half - 0.25 * x * s1;
    (k0, k1)
}

/// Steed's continued fraction (CF2) for `K_0` and `K_1`, `x >= 2`.
fn k01_continued_fraction(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: trapezoidal quadrature of `int_0^inf exp(-x cosh t) cosh(nu t) dt`.
    /// The integrand is analytic and decays double-exponentially, so the
    /// trapezoid rule converges geometrically.
    fn k_quadrature(nu: f64, x: f64) -> f64 {
        let h = 1e-3;
        let mut sum = 0.5 * (-x).exp();
        let mut t: f64 = h;
        loop {
            let v = (-x * t.cosh()).exp() * (nu * t).cosh();
            sum += v;
            if v < 1e-300 || t > 60.0 {
                break;
            }
            t += h;
        }
        sum * h
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn half_order_closed_form_matches_quadrature() {
        let k = bessel_k(0.5, 1.0).unwrap();
        let closed = (PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!(rel(k, closed) < 1e-15);
        assert!((k - 0.46107).abs() < 1e-5);
        assert!(rel(k, k_quadrature(0.5, 1.0)) < 1e-12);
    }

    #[test]
    fn three_halves_at_two() {
        let k = bessel_k(1.5, 2.0).unwrap();
        let closed = (PI / 4.0).sqrt() * (-2.0f64).exp() * 1.5;
        assert!(rel(k, closed) < 1e-15);
        assert!(rel(k, k_quadrature(1.5, 2.0)) < 1e-12);
    }

    #[test]
    fn integer_orders_match_quadrature_on_both_branches() {
        for &x in &[0.05, 0.3, 1.0, 1.9, 2.0, 2.1, 3.5, 7.0, 15.0, 40.0] {
            for n in 0..6u32 {
                let got = bessel_k(n as f64, x).unwrap();
                let want = k_quadrature(n as f64, x);
                assert!(rel(got, want) < 1e-12, "K_{n}({x}) = {got}, quadrature {want}");
            }
        }
    }

    #[test]
    fn tabulated_values() {
        assert!(rel(bessel_k(0.0, 1.0).unwrap(), 0.421_024_438_240_708_3) < 1e-14);
        assert!(rel(bessel_k(1.0, 1.0).unwrap(), 0.601_907_230_197_234_6) < 1e-14);
        assert!(rel(bessel_k(0.0, 0.1).unwrap(), 2.427_069_024_702_017) < 1e-13);
    }

    #[test]
    fn recurrence_identity_at_reference_point() {
        let (nu, r) = (2.0, 1.7);
        let lhs = bessel_k(nu + 1.0, r).unwrap() - bessel_k(nu - 1.0, r).unwrap();
        let rhs = 2.0 * nu / r * bessel_k(nu, r).unwrap();
        assert!(rel(lhs, rhs) < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(bessel_k(1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(bessel_k(1.0, -2.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(bessel_k(0.3, 1.0), Err(Error::UnsupportedOrder(_))));
        assert!(matches!(bessel_k(-1.0, 1.0), Err(Error::UnsupportedOrder(_))));
    }
}
