//! One-dimensional leading-order product approximation and its first
//! correction.
//!
//! With `p = e^{-theta tau}`, `q = p^2` and `rho = p/(1+p)`:
//!
//! ```text
//! h(tau, y)  = theta p (y - y0)/(1 - q) + rho A(y)
//! ln g       = rho [ln(theta/2pi) - ln f_inf(y) - ln f_inf(y0)]
//!              - ln(1 - q)/2 - theta p (y - y0)^2 / (2 (1 - q))
//! f          = g f_inf(y)
//! ```
//!
//! All densities are built in log space and exponentiated last.

use std::f64::consts::PI;

use crate::error::{FpxError, Result};
use crate::fisher;
use crate::models::DriftModel;
use crate::quadrature::integrate_adaptive;
use crate::special::Relaxation;

/// Largest `|ln f|` accepted before reporting overflow.
pub const LOG_LIMIT: f64 = 700.0;

/// Below this `|y - y0|` the correction `b1` uses its Taylor limit.
const B1_TAYLOR_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Approx1DContext<'a> {
    pub theta: f64,
    pub y0: f64,
    pub model: &'a DriftModel,
    pub ln_f_inf_y0: f64,
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(FpxError::param("tau", format!("must be positive, got {tau}")))
    }
}

impl<'a> Approx1DContext<'a> {
    pub fn new(model: &'a DriftModel, theta: f64, y0: f64) -> Result<Self> {
        if model.dim() != 1 {
            return Err(FpxError::DimensionMismatch {
                expected: 1,
                got: model.dim(),
            });
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(FpxError::param("theta", format!("must be positive, got {theta}")));
        }
        let ln_f_inf_y0 = model.ln_f_inf(&[y0]);
        if !ln_f_inf_y0.is_finite() {
            return Err(FpxError::param("y0", "invariant density vanishes at the start point"));
        }
        Ok(Approx1DContext {
            theta,
            y0,
            model,
            ln_f_inf_y0,
        })
    }

    /// Context with theta taken from the model (closed form or quadrature).
    pub fn from_model(model: &'a DriftModel, y0: f64) -> Result<Self> {
        let theta = fisher::resolve_theta(model, None)?.scalar();
        Approx1DContext::new(model, theta, y0)
    }

    fn relaxation(&self, tau: f64) -> Result<Relaxation> {
        check_tau(tau)?;
        Ok(Relaxation::new(self.theta * tau))
    }

    /// `h = -d/dy ln g` at leading order.
    pub fn h_leading(&self, tau: f64, y: f64) -> Result<f64> {
        let r = self.relaxation(tau)?;
        Ok(self.theta * r.p_over_one_minus_q * (y - self.y0) + r.p_over_one_plus_p * self.model.drift1(y))
    }

    fn ln_g_with(&self, r: &Relaxation, y: f64, ln_f_inf_y: f64) -> f64 {
        let d = y - self.y0;
        r.p_over_one_plus_p * ((self.theta / (2.0 * PI)).ln() - (ln_f_inf_y + self.ln_f_inf_y0))
            - 0.5 * r.ln_one_minus_q
            - 0.5 * self.theta * r.p_over_one_minus_q * d * d
    }

    pub fn ln_g_leading(&self, tau: f64, y: f64) -> Result<f64> {
        let r = self.relaxation(tau)?;
        Ok(self.ln_g_with(&r, y, self.model.ln_f_inf(&[y])))
    }

    pub fn ln_f_leading(&self, tau: f64, y: f64) -> Result<f64> {
        let r = self.relaxation(tau)?;
        let lf = self.model.ln_f_inf(&[y]);
        Ok(self.ln_g_with(&r, y, lf) + lf)
    }

    pub fn g_leading(&self, tau: f64, y: f64) -> Result<f64> {
        exp_checked(self.ln_g_leading(tau, y)?)
    }

    pub fn f_leading(&self, tau: f64, y: f64) -> Result<f64> {
        exp_checked(self.ln_f_leading(tau, y)?)
    }

    /// `F(z) = A'' + (A + theta (z - y0)/2)(A' + theta)`.
    fn b1_integrand_factor(&self, z: f64) -> f64 {
        let m = self.model;
        m.drift_second1(z)
            + (m.drift1(z) + 0.5 * self.theta * (z - self.y0)) * (m.drift_prime1(z) + self.theta)
    }

    /// First correction `b1(y) = (1/(theta (y-y0)^2)) int_{y0}^{y} (z - y0) F(z) dz`.
    pub fn b1_correction(&self, y: f64) -> Result<f64> {
        let (lo, hi) = if y < self.y0 { (y, self.y0) } else { (self.y0, y) };
        if self
            .model
            .discontinuities()
            .iter()
            .any(|&c| c >= lo && c <= hi)
        {
            return Err(FpxError::param(
                "model",
                "b1 needs a twice-differentiable drift between y0 and y",
            ));
        }
        let d = y - self.y0;
        if d.abs() < B1_TAYLOR_RADIUS {
            let f0 = self.b1_integrand_factor(self.y0);
            let step = 1e-4;
            let f1 = (self.b1_integrand_factor(self.y0 + step) - self.b1_integrand_factor(self.y0 - step))
                / (2.0 * step);
            return Ok((0.5 * f0 + f1 * d / 3.0) / self.theta);
        }
        let integral = integrate_adaptive(
            |z| (z - self.y0) * self.b1_integrand_factor(z),
            self.y0,
            y,
            1e-12,
            1e-300,
        )?;
        Ok(integral / (self.theta * d * d))
    }

    /// `h` including the first correction:
    /// `(p/(1+p)) (theta (y-y0)/(1-p) + A(y) + (1-p) b1(y))`.
    pub fn h_with_b1(&self, tau: f64, y: f64) -> Result<f64> {
        let r = self.relaxation(tau)?;
        let one_minus_p = -(-r.x).exp_m1();
        let b1 = self.b1_correction(y)?;
        Ok(self.theta * r.p_over_one_minus_q * (y - self.y0)
            + r.p_over_one_plus_p * (self.model.drift1(y) + one_minus_p * b1))
    }
}

/// Exponentiates a log-density. Large negative values underflow harmlessly
/// towards zero; large positive ones are reported.
pub(crate) fn exp_checked(ln: f64) -> Result<f64> {
    if ln > LOG_LIMIT || ln.is_nan() {
        return Err(FpxError::Overflow { log_value: ln });
    }
    Ok(ln.exp())
}
