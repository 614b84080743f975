//! Catalog of drift fields and their invariant densities.
//!
//! Every model is written in normalized coordinates, where the diffusion is
//! `dY = A(Y) dtau + sqrt(2) dW` and the forward equation reads
//! `f_tau = -div(A f) + lap f`. For conservative models `A = grad ln f_inf`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{FpxError, Result};
use crate::linalg;
use crate::quadrature::{self, GradedWindow};
use crate::special::{ln_beta, ln_cosh};

/// Relative tolerance used when normalizing models by quadrature.
const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `A(y) = -a (y - mean)`.
    Ou {
        generator: DMatrix<f64>,
        mean: Vec<f64>,
        /// Inverse stationary covariance.
        precision: DMatrix<f64>,
    },
    SechPower {
        gamma_hat: f64,
        delta_hat: f64,
    },
    DryFriction,
    StudentT {
        gamma_hat: f64,
        nu: f64,
    },
    DoubleWell {
        alpha: [f64; 2],
        beta: [f64; 2],
        gamma: f64,
    },
    StudentT2 {
        a1: f64,
        a2: f64,
        nu: f64,
    },
    DoubleWell2 {
        a: DMatrix<f64>,
        alpha1: [f64; 2],
        alpha2: [f64; 2],
        beta: [f64; 2],
        gamma: f64,
    },
}

/// A drift field with its invariant density.
#[derive(Debug, Clone)]
pub struct DriftModel {
    kind: ModelKind,
    dim: usize,
    ln_norm: f64,
    conservative: bool,
    closed_form_theta: Option<DMatrix<f64>>,
    mean_inf: Vec<f64>,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FpxError::param(name, format!("must be positive and finite, got {v}")))
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(FpxError::param(name, "must be finite"))
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// OU model `A(y) = theta (y_inf - y)`.
pub fn make_ou_1d(theta: f64, y_inf: f64) -> Result<DriftModel> {
    positive("theta", theta)?;
    finite("y_inf", y_inf)?;
    make_ou_nd(scalar(theta), vec![y_inf])
}

/// Multivariate OU model `A(y) = -a (y - mean)`.
///
/// A symmetric positive-definite generator gives a conservative model with
/// `theta = a`; a non-symmetric stable generator is accepted as a
/// non-conservative model whose stationary covariance solves the Lyapunov
/// equation.
pub fn make_ou_nd(a: DMatrix<f64>, mean: Vec<f64>) -> Result<DriftModel> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(FpxError::param("a", "generator must be a nonempty square matrix"));
    }
    let dim = a.nrows();
    if mean.len() != dim {
        return Err(FpxError::DimensionMismatch {
            expected: dim,
            got: mean.len(),
        });
    }
    if a.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
        return Err(FpxError::param("a", "entries must be finite"));
    }
    let symmetric = linalg::asymmetry(&a) < 1e-14;
    let (precision, conservative, theta) = if symmetric {
        if !linalg::is_positive_definite(&a) {
            return Err(FpxError::param("a", "symmetric generator must be positive definite"));
        }
        (a.clone(), true, Some(a.clone()))
    } else {
        let sigma = crate::exact::lyapunov_sigma_inf(&a)?;
        (linalg::inverse(&sigma, "stationary covariance")?, false, None)
    };
    let ln_norm = 0.5 * (precision.determinant() / (2.0 * PI).powi(dim as i32)).ln();
    Ok(DriftModel {
        kind: ModelKind::Ou {
            generator: a,
            mean: mean.clone(),
            precision,
        },
        dim,
        ln_norm,
        conservative,
        closed_form_theta: theta,
        mean_inf: mean,
    })
}

/// Sech-power model `A(y) = -(delta/gamma) tanh(gamma y)`.
pub fn make_sech_power(gamma_hat: f64, delta_hat: f64) -> Result<DriftModel> {
    positive("gamma_hat", gamma_hat)?;
    positive("delta_hat", delta_hat)?;
    let s = delta_hat / (gamma_hat * gamma_hat);
    let ln_norm = gamma_hat.ln() - ln_beta(0.5 * s, 0.5);
    Ok(DriftModel {
        kind: ModelKind::SechPower {
            gamma_hat,
            delta_hat,
        },
        dim: 1,
        ln_norm,
        conservative: true,
        closed_form_theta: Some(scalar(delta_hat * delta_hat / (delta_hat + gamma_hat * gamma_hat))),
        mean_inf: vec![0.0],
    })
}

/// Dry friction `A(y) = -sgn y`, with `f_inf = e^{-|y|}/2`.
pub fn make_dry_friction() -> DriftModel {
    DriftModel {
        kind: ModelKind::DryFriction,
        dim: 1,
        ln_norm: -std::f64::consts::LN_2,
        conservative: true,
        closed_form_theta: Some(scalar(1.0)),
        mean_inf: vec![0.0],
    }
}

/// Fat-tailed model `A(y) = -y / (1 + gamma^2 y^2)` with a Student-t
/// invariant density of `nu = 1 + 1/gamma^2` degrees of freedom.
pub fn make_student_t_1d(gamma_hat: f64) -> Result<DriftModel> {
    positive("gamma_hat", gamma_hat)?;
    if gamma_hat >= 1.0 {
        return Err(FpxError::param(
            "gamma_hat",
            "must be below 1 (nu = 1 + 1/gamma^2 must exceed 2 for a normalizable density)",
        ));
    }
    let nu = 1.0 + 1.0 / (gamma_hat * gamma_hat);
    let ln_norm = gamma_hat.ln() - ln_beta(0.5 * (nu - 2.0), 0.5);
    Ok(DriftModel {
        kind: ModelKind::StudentT { gamma_hat, nu },
        dim: 1,
        ln_norm,
        conservative: true,
        closed_form_theta: Some(scalar((nu - 2.0) / (nu + 1.0))),
        mean_inf: vec![0.0],
    })
}

/// Rational-times-Gaussian double well with zeros at `+-i gamma` and poles
/// at `alpha_j +- i beta_j`.
pub fn make_double_well_1d(alpha: [f64; 2], beta: [f64; 2], gamma: f64) -> Result<DriftModel> {
    finite("alpha", alpha[0])?;
    finite("alpha", alpha[1])?;
    positive("beta", beta[0])?;
    positive("beta", beta[1])?;
    positive("gamma", gamma)?;
    let mut model = DriftModel {
        kind: ModelKind::DoubleWell { alpha, beta, gamma },
        dim: 1,
        ln_norm: 0.0,
        conservative: true,
        closed_form_theta: None,
        mean_inf: vec![0.0],
    };
    model.normalize_by_quadrature()?;
    Ok(model)
}

/// Bivariate Student-t model.
pub fn make_student_t_2d(a1: f64, a2: f64, nu: f64) -> Result<DriftModel> {
    positive("a1", a1)?;
    positive("a2", a2)?;
    if !(nu > 2.0 && nu.is_finite()) {
        return Err(FpxError::param("nu", format!("must exceed 2, got {nu}")));
    }
    let k = (nu + 2.0) / (nu + 4.0);
    Ok(DriftModel {
        kind: ModelKind::StudentT2 { a1, a2, nu },
        dim: 2,
        ln_norm: ((a1 * a2).sqrt() / (2.0 * PI)).ln(),
        conservative: true,
        closed_form_theta: Some(DMatrix::from_row_slice(2, 2, &[k * a1, 0.0, 0.0, k * a2])),
        mean_inf: vec![0.0, 0.0],
    })
}

/// Bivariate double well with a Gaussian envelope `exp(-y^T a y / 2)`.
pub fn make_double_well_2d(
    a: DMatrix<f64>,
    alpha1: [f64; 2],
    alpha2: [f64; 2],
    beta: [f64; 2],
    gamma: f64,
) -> Result<DriftModel> {
    if a.shape() != (2, 2) {
        return Err(FpxError::param("a", "must be 2x2"));
    }
    if linalg::asymmetry(&a) > 1e-14 || !linalg::is_positive_definite(&a) {
        return Err(FpxError::param("a", "must be symmetric positive definite"));
    }
    for v in alpha1.iter().chain(&alpha2) {
        finite("alpha", *v)?;
    }
    positive("beta", beta[0])?;
    positive("beta", beta[1])?;
    positive("gamma", gamma)?;
    let mut model = DriftModel {
        kind: ModelKind::DoubleWell2 {
            a,
            alpha1,
            alpha2,
            beta,
            gamma,
        },
        dim: 2,
        ln_norm: 0.0,
        conservative: true,
        closed_form_theta: None,
        mean_inf: vec![0.0, 0.0],
    };
    model.normalize_by_quadrature()?;
    Ok(model)
}

/// `2x / (x^2 + b^2)` and its first two derivatives.
fn rational(x: f64, b: f64) -> (f64, f64, f64) {
    let n = x * x + b * b;
    let v = 2.0 * x / n;
    let d1 = 2.0 * (b * b - x * x) / (n * n);
    let d2 = -4.0 * x * (3.0 * b * b - x * x) / (n * n * n);
    (v, d1, d2)
}

impl DriftModel {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Config-file identifier of the model family.
    pub fn id(&self) -> &'static str {
        match self.kind {
            ModelKind::Ou { .. } => "ou",
            ModelKind::SechPower { .. } => "sech",
            ModelKind::DryFriction => "dryfric",
            ModelKind::StudentT { .. } => "student1d",
            ModelKind::DoubleWell { .. } => "dwell1d",
            ModelKind::StudentT2 { .. } => "student2d",
            ModelKind::DoubleWell2 { .. } => "dwell2d",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn conservative(&self) -> bool {
        self.conservative
    }

    pub fn closed_form_theta(&self) -> Option<&DMatrix<f64>> {
        self.closed_form_theta.as_ref()
    }

    /// Long-term mean `<Y>_inf`.
    pub fn mean_inf(&self) -> &[f64] {
        &self.mean_inf
    }

    /// Constant `K` with `f_inf = K exp(ln_f_inf_unnormalized)`.
    pub fn norm_const(&self) -> f64 {
        self.ln_norm.exp()
    }

    pub fn ln_norm_const(&self) -> f64 {
        self.ln_norm
    }

    /// Points where the drift is discontinuous (its Jacobian is then a
    /// distribution, not a function).
    pub fn discontinuities(&self) -> &'static [f64] {
        match self.kind {
            ModelKind::DryFriction => &[0.0],
            _ => &[],
        }
    }

    fn check_dim(&self, y: &[f64]) {
        debug_assert_eq!(y.len(), self.dim, "point dimension does not match model");
    }

    pub fn drift(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(y, &mut out);
        out
    }

    pub fn drift_into(&self, y: &[f64], out: &mut [f64]) {
        self.check_dim(y);
        match &self.kind {
            ModelKind::Ou {
                generator, mean, ..
            } => {
                for i in 0..self.dim {
                    out[i] = -(0..self.dim)
                        .map(|j| generator[(i, j)] * (y[j] - mean[j]))
                        .sum::<f64>();
                }
            }
            ModelKind::StudentT2 { a1, a2, nu } => {
                let d = 1.0 + (a1 * y[0] * y[0] + a2 * y[1] * y[1]) / nu;
                let c = (nu + 2.0) / nu / d;
                out[0] = -c * a1 * y[0];
                out[1] = -c * a2 * y[1];
            }
            ModelKind::DoubleWell2 {
                a,
                alpha1,
                alpha2,
                beta,
                gamma,
            } => {
                let n0 = y[0] * y[0] + y[1] * y[1] + gamma * gamma;
                let d1 = [y[0] - alpha1[0], y[1] - alpha1[1]];
                let d2 = [y[0] - alpha2[0], y[1] - alpha2[1]];
                let n1 = d1[0] * d1[0] + d1[1] * d1[1] + beta[0] * beta[0];
                let n2 = d2[0] * d2[0] + d2[1] * d2[1] + beta[1] * beta[1];
                for i in 0..2 {
                    out[i] = -(a[(i, 0)] * y[0] + a[(i, 1)] * y[1]) + 2.0 * y[i] / n0
                        - 2.0 * d1[i] / n1
                        - 2.0 * d2[i] / n2;
                }
            }
            _ => out[0] = self.drift1(y[0]),
        }
    }

    /// Drift of a one-dimensional model.
    pub fn drift1(&self, y: f64) -> f64 {
        match &self.kind {
            ModelKind::Ou {
                generator, mean, ..
            } => -generator[(0, 0)] * (y - mean[0]),
            ModelKind::SechPower {
                gamma_hat,
                delta_hat,
            } => -(delta_hat / gamma_hat) * (gamma_hat * y).tanh(),
            ModelKind::DryFriction => {
                if y > 0.0 {
                    -1.0
                } else if y < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::StudentT { gamma_hat, .. } => -y / (1.0 + gamma_hat * gamma_hat * y * y),
            ModelKind::DoubleWell { alpha, beta, gamma } => {
                -y + rational(y, *gamma).0
                    - rational(y - alpha[0], beta[0]).0
                    - rational(y - alpha[1], beta[1]).0
            }
            _ => panic!("drift1 called on a {}-dimensional model", self.dim),
        }
    }

    /// `A'(y)` of a one-dimensional model (zero away from discontinuities).
    pub fn drift_prime1(&self, y: f64) -> f64 {
        match &self.kind {
            ModelKind::Ou { generator, .. } => -generator[(0, 0)],
            ModelKind::SechPower {
                gamma_hat,
                delta_hat,
            } => {
                let s = 1.0 / (gamma_hat * y).cosh();
                -delta_hat * s * s
            }
            ModelKind::DryFriction => 0.0,
            ModelKind::StudentT { gamma_hat, .. } => {
                let u = gamma_hat * gamma_hat;
                let d = 1.0 + u * y * y;
                (u * y * y - 1.0) / (d * d)
            }
            ModelKind::DoubleWell { alpha, beta, gamma } => {
                -1.0 + rational(y, *gamma).1
                    - rational(y - alpha[0], beta[0]).1
                    - rational(y - alpha[1], beta[1]).1
            }
            _ => panic!("drift_prime1 called on a {}-dimensional model", self.dim),
        }
    }

    /// `A''(y)` of a one-dimensional model.
    pub fn drift_second1(&self, y: f64) -> f64 {
        match &self.kind {
            ModelKind::Ou { .. } | ModelKind::DryFriction => 0.0,
            ModelKind::SechPower {
                gamma_hat,
                delta_hat,
            } => {
                let g = *gamma_hat;
                let s = 1.0 / (g * y).cosh();
                2.0 * delta_hat * g * s * s * (g * y).tanh()
            }
            ModelKind::StudentT { gamma_hat, .. } => {
                let u = gamma_hat * gamma_hat;
                let d = 1.0 + u * y * y;
                2.0 * u * y * (3.0 - u * y * y) / (d * d * d)
            }
            ModelKind::DoubleWell { alpha, beta, gamma } => {
                rational(y, *gamma).2
                    - rational(y - alpha[0], beta[0]).2
                    - rational(y - alpha[1], beta[1]).2
            }
            _ => panic!("drift_second1 called on a {}-dimensional model", self.dim),
        }
    }

    /// Jacobian `grad A` (row i holds the gradient of `A_i`).
    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        self.check_dim(y);
        match &self.kind {
            ModelKind::Ou { generator, .. } => -generator.clone(),
            ModelKind::StudentT2 { a1, a2, nu } => {
                let c = (nu + 2.0) / nu;
                let d = 1.0 + (a1 * y[0] * y[0] + a2 * y[1] * y[1]) / nu;
                let av = [*a1, *a2];
                let u = [a1 * y[0], a2 * y[1]];
                DMatrix::from_fn(2, 2, |i, j| {
                    let diag = if i == j { av[i] / d } else { 0.0 };
                    -c * (diag - (u[i] * u[j]) * 2.0 / (nu * d * d))
                })
            }
            ModelKind::DoubleWell2 {
                a,
                alpha1,
                alpha2,
                beta,
                gamma,
            } => {
                let d0 = [y[0], y[1]];
                let d1 = [y[0] - alpha1[0], y[1] - alpha1[1]];
                let d2 = [y[0] - alpha2[0], y[1] - alpha2[1]];
                let term = |d: &[f64; 2], b: f64, i: usize, j: usize| {
                    let n = d[0] * d[0] + d[1] * d[1] + b * b;
                    let delta = if i == j { 1.0 } else { 0.0 };
                    2.0 * (delta / n - (d[i] * d[j]) * 2.0 / (n * n))
                };
                DMatrix::from_fn(2, 2, |i, j| {
                    -a[(i, j)] + term(&d0, *gamma, i, j)
                        - term(&d1, beta[0], i, j)
                        - term(&d2, beta[1], i, j)
                })
            }
            _ => scalar(self.drift_prime1(y[0])),
        }
    }

    /// `div A`.
    pub fn divergence(&self, y: &[f64]) -> f64 {
        self.jacobian(y).trace()
    }

    /// `ln f_inf` up to the additive constant `ln K`.
    pub fn ln_f_inf_unnormalized(&self, y: &[f64]) -> f64 {
        self.check_dim(y);
        match &self.kind {
            ModelKind::Ou {
                mean, precision, ..
            } => {
                let d = linalg::sub(y, mean);
                -0.5 * linalg::quad_form(precision, &d)
            }
            ModelKind::SechPower {
                gamma_hat,
                delta_hat,
            } => -(delta_hat / (gamma_hat * gamma_hat)) * ln_cosh(gamma_hat * y[0]),
            ModelKind::DryFriction => -y[0].abs(),
            ModelKind::StudentT { gamma_hat, .. } => {
                let u = gamma_hat * gamma_hat;
                -(0.5 / u) * (u * y[0] * y[0]).ln_1p()
            }
            ModelKind::DoubleWell { alpha, beta, gamma } => {
                let x = y[0];
                -0.5 * x * x + (x * x + gamma * gamma).ln()
                    - ((x - alpha[0]).powi(2) + beta[0] * beta[0]).ln()
                    - ((x - alpha[1]).powi(2) + beta[1] * beta[1]).ln()
            }
            ModelKind::StudentT2 { a1, a2, nu } => {
                -0.5 * (nu + 2.0) * ((a1 * y[0] * y[0] + a2 * y[1] * y[1]) / nu).ln_1p()
            }
            ModelKind::DoubleWell2 {
                a,
                alpha1,
                alpha2,
                beta,
                gamma,
            } => {
                let sq = |d0: f64, d1: f64| d0 * d0 + d1 * d1;
                -0.5 * linalg::quad_form(a, y) + (sq(y[0], y[1]) + gamma * gamma).ln()
                    - (sq(y[0] - alpha1[0], y[1] - alpha1[1]) + beta[0] * beta[0]).ln()
                    - (sq(y[0] - alpha2[0], y[1] - alpha2[1]) + beta[1] * beta[1]).ln()
            }
        }
    }

    /// Normalized `ln f_inf(y)`.
    pub fn ln_f_inf(&self, y: &[f64]) -> f64 {
        self.ln_f_inf_unnormalized(y) + self.ln_norm
    }

    pub fn f_inf(&self, y: &[f64]) -> f64 {
        self.ln_f_inf(y).exp()
    }

    /// Per-axis truncated windows on which integrals against `f_inf` are taken.
    pub fn integration_windows(&self) -> Vec<GradedWindow> {
        match &self.kind {
            ModelKind::Ou {
                generator,
                mean,
                precision,
            } => {
                let _ = generator;
                let cov = linalg::inverse(precision, "precision").unwrap_or_else(|_| {
                    DMatrix::identity(self.dim, self.dim)
                });
                (0..self.dim)
                    .map(|i| {
                        let sd = cov[(i, i)].sqrt();
                        GradedWindow::new(mean[i], 12.0 * sd, sd)
                    })
                    .collect()
            }
            ModelKind::SechPower {
                gamma_hat,
                delta_hat,
            } => {
                let l = (40.0 * gamma_hat / delta_hat).max(12.0 / delta_hat.sqrt());
                vec![GradedWindow::new(0.0, l, 1.0 / delta_hat.sqrt())]
            }
            ModelKind::DryFriction => vec![GradedWindow::new(0.0, 40.0, 1.0)],
            ModelKind::StudentT { gamma_hat, .. } => {
                vec![GradedWindow::new(0.0, 200.0, 1.0_f64.min(1.0 / gamma_hat))]
            }
            ModelKind::DoubleWell { alpha, .. } => {
                let l = 12.0 + alpha[0].abs().max(alpha[1].abs());
                vec![GradedWindow::new(0.0, l, 1.0)]
            }
            ModelKind::StudentT2 { a1, a2, .. } => vec![
                GradedWindow::new(0.0, 200.0 / a1.sqrt(), 1.0 / a1.sqrt()),
                GradedWindow::new(0.0, 200.0 / a2.sqrt(), 1.0 / a2.sqrt()),
            ],
            ModelKind::DoubleWell2 {
                a, alpha1, alpha2, ..
            } => {
                let lmin = linalg::sym_eigen(a).eigenvalues.min();
                let reach = alpha1
                    .iter()
                    .chain(alpha2)
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
                let l = 12.0 / lmin.sqrt() + reach;
                vec![GradedWindow::new(0.0, l, 1.0); 2]
            }
        }
    }

    /// Mass of `f_inf` outside the integration windows, where it is known
    /// analytically (the Student-t power-law tails); zero otherwise.
    pub fn analytic_tail_mass(&self) -> f64 {
        match self.kind {
            ModelKind::StudentT { gamma_hat, .. } => {
                let l = self.integration_windows()[0].half_width;
                2.0 * self.norm_const() * student_tail(gamma_hat, l)
            }
            _ => 0.0,
        }
    }

    /// `int f_inf(y) g(y) dy` over the truncated domain, doubling the panel
    /// count until every component changes by less than `tol` (relative to
    /// the largest component).
    pub fn expectation<const K: usize, G>(&self, tol: f64, g: G) -> Result<ExpectationResult<K>>
    where
        G: Fn(&[f64]) -> [f64; K] + Sync,
    {
        let windows = self.integration_windows();
        let ln_norm = self.ln_norm;
        integrate_converged(&windows, tol, |y: &[f64]| {
            let w = (self.ln_f_inf_unnormalized(y) + ln_norm).exp();
            let mut v = g(y);
            for c in v.iter_mut() {
                *c *= w;
            }
            v
        })
    }

    /// Total mass of `f_inf` (should be 1), including analytic tails.
    pub fn total_mass(&self, tol: f64) -> Result<f64> {
        Ok(self.expectation(tol, |_| [1.0])?.value[0] + self.analytic_tail_mass())
    }

    fn normalize_by_quadrature(&mut self) -> Result<()> {
        let windows = self.integration_windows();
        let mass = integrate_converged(&windows, NORMALIZATION_TOL, |y: &[f64]| {
            [self.ln_f_inf_unnormalized(y).exp()]
        })?;
        self.ln_norm = -mass.value[0].ln();
        // The mass entry keeps the convergence scale O(1) when the mean is ~0.
        let mean = match self.dim {
            1 => self.expectation(NORMALIZATION_TOL, |y| [1.0, y[0]])?.value[1..].to_vec(),
            _ => self
                .expectation(NORMALIZATION_TOL, |y| [1.0, y[0], y[1]])?
                .value[1..]
                .to_vec(),
        };
        // Exact zeros for symmetric parameter sets.
        self.mean_inf = mean
            .into_iter()
            .map(|m| if m.abs() < 1e-13 { 0.0 } else { m })
            .collect();
        Ok(())
    }
}

/// `int_L^inf (1 + g^2 y^2)^{-s} dy` with `s = 1/(2 g^2)`, by the convergent
/// expansion in `1/(g y)^2`.
fn student_tail(gamma_hat: f64, l: f64) -> f64 {
    let s = 0.5 / (gamma_hat * gamma_hat);
    let gl = gamma_hat * l;
    let mut sum = 0.0;
    let mut coeff = 1.0; // (-1)^k (s)_k / k!
    for k in 0..200 {
        let kf = k as f64;
        let p = 2.0 * s + 2.0 * kf;
        let term = coeff * gl.powf(-p) * l / (p - 1.0);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        coeff *= -(s + kf) / (kf + 1.0);
    }
    sum
}

/// Value and estimated quadrature error of a converged expectation.
#[derive(Debug, Clone, Copy)]
pub struct ExpectationResult<const K: usize> {
    pub value: [f64; K],
    /// Max-norm change over the last panel doubling.
    pub error: f64,
    pub panels: usize,
}

const INITIAL_PANELS: usize = 32;
const MAX_DOUBLINGS: usize = 5;

/// Tensor Gauss–Legendre integration over 1D or 2D graded windows with
/// panel doubling until the max-norm change is below `tol * max|value|`.
pub(crate) fn integrate_converged<const K: usize, G>(
    windows: &[GradedWindow],
    tol: f64,
    g: G,
) -> Result<ExpectationResult<K>>
where
    G: Fn(&[f64]) -> [f64; K] + Sync,
{
    let mut panels = if windows.len() == 1 {
        INITIAL_PANELS
    } else {
        INITIAL_PANELS / 2
    };
    let mut prev = integrate_tensor(windows, panels, &g);
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let next = integrate_tensor(windows, panels, &g);
        let scale = next.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let change = next
            .iter()
            .zip(&prev)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= tol * scale {
            return Ok(ExpectationResult {
                value: next,
                error: change,
                panels,
            });
        }
        prev = next;
        if windows.len() == 2 && panels >= 256 {
            break;
        }
    }
    let last = integrate_tensor(windows, panels, &g);
    Err(FpxError::QuadratureNonConvergence {
        last: last.to_vec(),
        previous: prev.to_vec(),
    })
}

pub(crate) fn integrate_tensor<const K: usize, G>(
    windows: &[GradedWindow],
    panels: usize,
    g: &G,
) -> [f64; K]
where
    G: Fn(&[f64]) -> [f64; K] + Sync,
{
    use rayon::prelude::*;
    let rules: Vec<quadrature::Rule1D> = windows.iter().map(|w| w.rule(panels)).collect();
    let mut total = [0.0; K];
    match rules.len() {
        1 => {
            for (&x, &w) in rules[0].x.iter().zip(&rules[0].w) {
                let v = g(&[x]);
                for k in 0..K {
                    total[k] += w * v[k];
                }
            }
        }
        2 => {
            let (rx, ry) = (&rules[0], &rules[1]);
            let rows: Vec<[f64; K]> = rx
                .x
                .par_iter()
                .zip(rx.w.par_iter())
                .map(|(&x, &wx)| {
                    let mut row = [0.0; K];
                    for (&y, &wy) in ry.x.iter().zip(&ry.w) {
                        let v = g(&[x, y]);
                        for k in 0..K {
                            row[k] += wy * v[k];
                        }
                    }
                    for r in row.iter_mut() {
                        *r *= wx;
                    }
                    row
                })
                .collect();
            for row in rows {
                for k in 0..K {
                    total[k] += row[k];
                }
            }
        }
        n => panic!("tensor quadrature supports 1 or 2 axes, got {n}"),
    }
    total
}
