//! Reversion-speed estimator `theta = <-grad A>_inf`, the Fisher information
//! of the invariant density.

use nalgebra::DMatrix;

use crate::error::{FpxError, Result};
use crate::linalg;
use crate::models::{DriftModel, ModelKind};

/// Panel refinement stops once the matrix changes by less than this.
pub const THETA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaSource {
    ClosedForm,
    Quadrature,
    Override,
}

#[derive(Debug, Clone)]
pub struct ThetaEstimate {
    pub theta: DMatrix<f64>,
    pub quad_error: f64,
    pub source: ThetaSource,
}

impl ThetaEstimate {
    /// The scalar value of a 1x1 estimate.
    pub fn scalar(&self) -> f64 {
        self.theta[(0, 0)]
    }
}

fn finish(model: &DriftModel, entries: &[f64], error: f64) -> Result<ThetaEstimate> {
    let m = model.dim();
    let mut theta = DMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in i..m {
            theta[(i, j)] = entries[k];
            theta[(j, i)] = entries[k];
            k += 1;
        }
    }
    if !linalg::is_positive_definite(&theta) {
        return Err(FpxError::param(
            "model",
            format!("Fisher matrix is not positive definite: {theta}"),
        ));
    }
    Ok(ThetaEstimate {
        theta,
        quad_error: error,
        source: ThetaSource::Quadrature,
    })
}

/// `<-grad A>_inf` by quadrature. Models with a discontinuous drift use the
/// equivalent `<A A^T>_inf` form, since their Jacobian carries a delta.
pub fn estimate_theta(model: &DriftModel) -> Result<ThetaEstimate> {
    if !model.discontinuities().is_empty() {
        return estimate_theta_outer(model);
    }
    match model.dim() {
        1 => {
            let r = model.expectation(THETA_TOL, |y| [-model.drift_prime1(y[0])])?;
            finish(model, &r.value, r.error)
        }
        2 => {
            let r = model.expectation(THETA_TOL, |y| {
                let j = model.jacobian(y);
                [-j[(0, 0)], -0.5 * (j[(0, 1)] + j[(1, 0)]), -j[(1, 1)]]
            })?;
            finish(model, &r.value, r.error)
        }
        m => Err(FpxError::param("model", format!("quadrature supports 1 or 2 dimensions, got {m}"))),
    }
}

/// `<A A^T>_inf` by quadrature, which equals `<-grad A>_inf` for conservative
/// drifts by integration by parts.
pub fn estimate_theta_outer(model: &DriftModel) -> Result<ThetaEstimate> {
    match model.dim() {
        1 => {
            let r = model.expectation(THETA_TOL, |y| {
                let a = model.drift1(y[0]);
                [a * a]
            })?;
            finish(model, &r.value, r.error)
        }
        2 => {
            let r = model.expectation(THETA_TOL, |y| {
                let a = model.drift(y);
                [a[0] * a[0], a[0] * a[1], a[1] * a[1]]
            })?;
            finish(model, &r.value, r.error)
        }
        m => Err(FpxError::param("model", format!("quadrature supports 1 or 2 dimensions, got {m}"))),
    }
}

/// Picks the theta used by the approximations: an explicit override, else the
/// model's closed form, else quadrature.
pub fn resolve_theta(model: &DriftModel, theta_override: Option<DMatrix<f64>>) -> Result<ThetaEstimate> {
    if let Some(theta) = theta_override {
        if theta.shape() != (model.dim(), model.dim()) {
            return Err(FpxError::DimensionMismatch {
                expected: model.dim(),
                got: theta.nrows(),
            });
        }
        linalg::require_symmetric(&theta, 1e-12)?;
        if !linalg::is_positive_definite(&theta) {
            return Err(FpxError::param("theta", "override must be positive definite"));
        }
        return Ok(ThetaEstimate {
            theta,
            quad_error: 0.0,
            source: ThetaSource::Override,
        });
    }
    if let Some(theta) = model.closed_form_theta() {
        return Ok(ThetaEstimate {
            theta: theta.clone(),
            quad_error: 0.0,
            source: ThetaSource::ClosedForm,
        });
    }
    if !model.conservative() {
        if let ModelKind::Ou { .. } = model.kind() {
            return Err(FpxError::param(
                "model",
                "non-conservative OU has no Fisher reversion speed; use the non-conservative tools",
            ));
        }
    }
    estimate_theta(model)
}
