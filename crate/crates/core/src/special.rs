//! Special functions and numerically stable relaxation factors.

use std::f64::consts::PI;


/// Standard normal CDF, evaluated through erfc so the lower tail keeps
/// full relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

/// Argument above which the modified Bessel function switches from its
/// power series to the large-argument expansion.
const BESSEL_ASYMPTOTIC_SWITCH: f64 = 30.0;

/// `ln I_order(z)` for `z > 0` and `order > -1`.
///
/// Power series (summed relative to its first term) for `z <= 30`, and the
/// Hankel large-argument expansion `e^z / sqrt(2 pi z) * sum_k (-1)^k a_k / z^k`
/// beyond, truncated at its smallest term.
pub fn ln_bessel_i(order: f64, z: f64) -> f64 {
    assert!(order > -1.0, "order must exceed -1");
    if z <= 0.0 {
        return if z == 0.0 && order == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    if z <= BESSEL_ASYMPTOTIC_SWITCH {
        let ln_t0 = order * (0.5 * z).ln() - ln_gamma(order + 1.0);
        let x = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= x / ((k + 1.0) * (k + order + 1.0));
            sum += term;
            k += 1.0;
            if term < sum * 1e-17 || k > 500.0 {
                break;
            }
        }
        ln_t0 + sum.ln()
    } else {
        let mu = 4.0 * order * order;
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let kk = k as f64;
            let odd = 2.0 * kk - 1.0;
            term *= -(mu - odd * odd) / (kk * 8.0 * z);
            if term.abs() >= prev || term.abs() < 1e-18 * sum.abs() {
                if term.abs() < prev {
                    sum += term;
                }
                break;
            }
            prev = term.abs();
            sum += term;
        }
        z - 0.5 * (2.0 * PI * z).ln() + sum.ln()
    }
}

/// Exponentially scaled modified Bessel function `e^{-z} I_order(z)`.
pub fn bessel_i_scaled(order: f64, z: f64) -> f64 {
    (ln_bessel_i(order, z) - z).exp()
}

/// Scalar relaxation factors of an OU-type kernel at `x = theta * tau`,
/// written so that none of them loses precision as `x -> 0` or `x -> inf`.
///
/// With `p = e^{-x}` and `q = p^2`:
/// * `p_over_one_minus_q = p / (1 - q) = 1 / (2 sinh x)`
/// * `p_over_one_plus_p = p / (1 + p) = 1 / (1 + e^x)`
/// * `ln_one_minus_q = ln(1 - q)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub x: f64,
    pub p: f64,
    pub p_over_one_minus_q: f64,
    pub p_over_one_plus_p: f64,
    pub one_minus_q: f64,
    pub ln_one_minus_q: f64,
}

/// Below this value of `theta * tau` the series branch is used.
pub const SMALL_RELAXATION: f64 = 1e-8;

impl Relaxation {
    pub fn new(x: f64) -> Self {
        debug_assert!(x >= 0.0);
        if x < SMALL_RELAXATION {
            // Second-order developments around x = 0.
            let x2 = x * x;
            let one_minus_q = 2.0 * x - 2.0 * x2;
            Relaxation {
                x,
                p: 1.0 - x + 0.5 * x2,
                p_over_one_minus_q: (1.0 - x2 / 6.0) / (2.0 * x),
                p_over_one_plus_p: 0.5 - 0.25 * x,
                one_minus_q,
                ln_one_minus_q: (2.0 * x).ln() - x + x2 / 3.0,
            }
        } else {
            let one_minus_q = -(-2.0 * x).exp_m1();
            Relaxation {
                x,
                p: (-x).exp(),
                p_over_one_minus_q: 0.5 / x.sinh(),
                p_over_one_plus_p: 1.0 / (1.0 + x.exp()),
                one_minus_q,
                ln_one_minus_q: one_minus_q.ln(),
            }
        }
    }
}
