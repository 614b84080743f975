//! Far-field expansion, the half-line square-root approximation and the
//! non-conservative OU correspondence.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::approx1d::{check_tau, exp_checked};
use crate::error::{FpxError, Result};
use crate::exact::{lyapunov_sigma_inf, require_stable};
use crate::linalg;
use crate::models::DriftModel;
use crate::quadrature::integrate_adaptive;
use crate::special::Relaxation;

/// Start point and options for the far-field approximation, which ignores
/// mean reversion and suits starts far from equilibrium.
#[derive(Debug, Clone)]
pub struct FarFieldContext<'a> {
    pub model: &'a DriftModel,
    pub y0: Vec<f64>,
    /// Keep the `div A` term, which the usual form drops.
    pub include_div_a: bool,
}

impl<'a> FarFieldContext<'a> {
    pub fn new(model: &'a DriftModel, y0: Vec<f64>) -> Result<Self> {
        if y0.len() != model.dim() {
            return Err(FpxError::DimensionMismatch {
                expected: model.dim(),
                got: y0.len(),
            });
        }
        Ok(FarFieldContext {
            model,
            y0,
            include_div_a: false,
        })
    }

    pub fn with_div_a(mut self, include: bool) -> Self {
        self.include_div_a = include;
        self
    }

    fn decay_rate(&self, y: &[f64]) -> f64 {
        let a = self.model.drift(y);
        let a0 = self.model.drift(&self.y0);
        let mut rate = (linalg::norm_sq(&a) + linalg::norm_sq(&a0)) / 8.0;
        if self.include_div_a {
            rate += (self.model.divergence(y) + self.model.divergence(&self.y0)) / 4.0;
        }
        rate
    }

    /// `ln g` with the m-dimensional heat-kernel prefactor `(4 pi tau)^{-m/2}`.
    pub fn ln_far_field_g(&self, tau: f64, y: &[f64]) -> Result<f64> {
        check_tau(tau)?;
        let m = self.model.dim() as f64;
        let d2 = linalg::norm_sq(&linalg::sub(y, &self.y0));
        Ok(-0.5 * m * (4.0 * PI * tau).ln()
            - d2 / (4.0 * tau)
            - self.decay_rate(y) * tau
            - 0.5 * (self.model.ln_f_inf(y) + self.model.ln_f_inf(&self.y0)))
    }

    pub fn far_field_g(&self, tau: f64, y: &[f64]) -> Result<f64> {
        exp_checked(self.ln_far_field_g(tau, y)?)
    }

    pub fn far_field_f(&self, tau: f64, y: &[f64]) -> Result<f64> {
        exp_checked(self.ln_far_field_g(tau, y)? + self.model.ln_f_inf(y))
    }

    /// Regime indicator `|A(y)| / (theta |y - mu|)`; small values mark the far field.
    pub fn regime_indicator(&self, theta: f64, y: &[f64]) -> f64 {
        let a = linalg::norm_sq(&self.model.drift(y)).sqrt();
        let dist = linalg::norm_sq(&linalg::sub(y, self.model.mean_inf())).sqrt();
        a / (theta * dist)
    }

    /// `B_1(y)` in one dimension. With `slowly_varying` the endpoint average
    /// replaces the quadrature.
    pub fn b1_far_field(&self, y: f64, slowly_varying: bool) -> Result<f64> {
        if self.model.dim() != 1 {
            return Err(FpxError::param("model", "b1_far_field is one-dimensional"));
        }
        let m = self.model;
        let y0 = self.y0[0];
        if slowly_varying {
            let (a, a0) = (m.drift1(y), m.drift1(y0));
            let mut b = (a * a + a0 * a0) / 8.0;
            if self.include_div_a {
                b += (m.drift_prime1(y) + m.drift_prime1(y0)) / 4.0;
            }
            return Ok(b);
        }
        if self.include_div_a {
            if let Some(&z) = m
                .discontinuities()
                .iter()
                .find(|&&z| z >= y.min(y0) && z <= y.max(y0))
            {
                return Err(FpxError::param(
                    "y",
                    format!("drift derivative is singular at {z}, inside the integration range"),
                ));
            }
        }
        b1_far_field_for(|z| m.drift1(z), |z| m.drift_prime1(z), y0, y, self.include_div_a)
    }
}

/// `(1/(y - y0)) int_{y0}^{y} (A^2/4 [+ A'/2]) dz` for an arbitrary drift.
pub fn b1_far_field_for(
    a: impl Fn(f64) -> f64,
    a_prime: impl Fn(f64) -> f64,
    y0: f64,
    y: f64,
    include_div_a: bool,
) -> Result<f64> {
    let integrand = |z: f64| {
        let v = a(z);
        let mut s = v * v / 4.0;
        if include_div_a {
            s += a_prime(z) / 2.0;
        }
        s
    };
    if (y - y0).abs() < 1e-12 * (1.0 + y0.abs()) {
        return Ok(integrand(y0));
    }
    let integral = integrate_adaptive(integrand, y0, y, 1e-12, 1e-15)?;
    Ok(integral / (y - y0))
}

/// Half-line leading-order `h` for the square-root normal form with
/// `A(y) = nu - y`. The exact process corresponds to `theta = 1/2`.
pub fn sqrt_h_leading(theta: f64, nu: f64, y0: f64, tau: f64, y: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(FpxError::param("theta", "must be positive"));
    }
    if !(nu > 0.0) {
        return Err(FpxError::param("nu", "must be positive"));
    }
    if !(y > 0.0) || !(y0 > 0.0) {
        return Err(FpxError::Domain(format!(
            "square-root states must be positive (y={y}, y0={y0})"
        )));
    }
    check_tau(tau)?;
    let r = Relaxation::new(theta * tau);
    let first = 2.0 * theta * r.p_over_one_minus_q * (1.0 - (y0 / y).sqrt());
    let second = r.p_over_one_plus_p * ((nu - y) / y - 0.5 / y);
    Ok(first + second)
}

/// Default reversion speed for [`sqrt_h_leading`].
pub const SQRT_THETA: f64 = 0.5;

/// `H = -grad ln(f/f_inf)` of the non-conservative OU process with generator
/// `a` and stationary covariance `sigma_inf`.
pub fn nonconservative_h(
    a: &DMatrix<f64>,
    sigma_inf: &DMatrix<f64>,
    tau: f64,
    y: &[f64],
    y0: &[f64],
) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let m = a.nrows();
    if y.len() != m || y0.len() != m || sigma_inf.nrows() != m {
        return Err(FpxError::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    require_stable(a)?;
    let e_plus = linalg::expm(&(a * tau));
    let e_minus_t = linalg::expm(&(-a.transpose() * tau));
    let bracket = &e_plus * sigma_inf - sigma_inf * &e_minus_t;
    let inv = linalg::inverse(&bracket, "non-conservative H bracket")?;
    let sigma_inv = linalg::inverse(sigma_inf, "stationary covariance")?;
    let second = &inv * sigma_inf * (&e_minus_t - DMatrix::identity(m, m)) * &sigma_inv;
    let d = linalg::sub(y, y0);
    let h1 = linalg::mat_vec(&inv, &d);
    let h2 = linalg::mat_vec(&second, y);
    Ok(h1.iter().zip(&h2).map(|(p, q)| p + q).collect())
}

/// [`nonconservative_h`] with `sigma_inf` solved from the Lyapunov equation.
pub fn nonconservative_h_auto(a: &DMatrix<f64>, tau: f64, y: &[f64], y0: &[f64]) -> Result<Vec<f64>> {
    let sigma = lyapunov_sigma_inf(a)?;
    nonconservative_h(a, &sigma, tau, y, y0)
}
