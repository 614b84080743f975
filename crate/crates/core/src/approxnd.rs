//! Multivariate leading-order approximation.
//!
//! Matrix functions of the symmetric reversion-speed matrix `theta` are
//! applied through its eigendecomposition. The interpolating factor
//! `Omega(tau, y) = exp int_{mu}^{y} dx . M A(x)`, with `M = sqrt(q)/(I + sqrt(q))`,
//! is taken along the straight line from the long-term mean.

use std::cell::Cell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::approx1d::{check_tau, exp_checked};
use crate::error::{FpxError, Result};
use crate::fisher;
use crate::linalg;
use crate::models::{DriftModel, ModelKind};
use crate::quadrature::integrate_adaptive;
use crate::special::Relaxation;

/// Relative tolerance of the Omega line quadrature.
pub const OMEGA_TOL: f64 = 1e-9;

/// Symmetric positive-definite `theta` with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct MatrixKernel {
    pub theta: DMatrix<f64>,
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
}

impl MatrixKernel {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        linalg::require_symmetric(&theta, 1e-12)?;
        let eig = linalg::sym_eigen(&theta);
        if let Some(&l) = eig.eigenvalues.iter().find(|&&l| !(l > 0.0)) {
            return Err(FpxError::param(
                "theta",
                format!("must be positive definite (eigenvalue {l})"),
            ));
        }
        Ok(MatrixKernel {
            theta,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        linalg::apply_spectral(&self.eigvecs, &self.eigvals, f)
    }

    /// `q = exp(-2 theta tau)`.
    pub fn q(&self, tau: f64) -> DMatrix<f64> {
        self.apply(|l| (-2.0 * l * tau).exp())
    }

    /// `M = sqrt(q) (I + sqrt(q))^{-1}`.
    pub fn mid_factor(&self, tau: f64) -> DMatrix<f64> {
        self.apply(|l| Relaxation::new(l * tau).p_over_one_plus_p)
    }

    /// `theta sqrt(q) (I - q)^{-1}`.
    pub fn gaussian_factor(&self, tau: f64) -> DMatrix<f64> {
        self.apply(|l| l * Relaxation::new(l * tau).p_over_one_minus_q)
    }
}

/// `rho(tau) = tr(sqrt(q) (I + sqrt(q))^{-1}) / m`, between 0 and 1/2.
pub fn rho(kernel: &MatrixKernel, tau: f64) -> f64 {
    let m = kernel.dim() as f64;
    kernel
        .eigvals
        .iter()
        .map(|&l| Relaxation::new(l * tau.max(0.0)).p_over_one_plus_p)
        .sum::<f64>()
        / m
}

/// How `Omega` is evaluated for a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaForm {
    /// `(f_inf(y)/f_inf(mu))^{rho}` in one dimension.
    OneDim,
    /// `exp(-1/2 (y-mu)^T a M (y-mu))` when `theta` commutes with `a`.
    SymmetricOu,
    /// Bivariate Student-t with diagonal `theta`.
    StudentDiagonal,
    /// Adaptive line quadrature.
    Quadrature,
}

#[derive(Debug, Clone)]
pub struct ApproxNDContext<'a> {
    pub kernel: MatrixKernel,
    pub y0: Vec<f64>,
    pub model: &'a DriftModel,
    pub mu_inf: Vec<f64>,
    pub ln_f_inf_mu: f64,
    omega_form: OmegaForm,
}

impl<'a> ApproxNDContext<'a> {
    pub fn new(model: &'a DriftModel, theta: DMatrix<f64>, y0: Vec<f64>) -> Result<Self> {
        let m = model.dim();
        if theta.nrows() != m || y0.len() != m {
            return Err(FpxError::DimensionMismatch {
                expected: m,
                got: if theta.nrows() != m { theta.nrows() } else { y0.len() },
            });
        }
        if !model.conservative() {
            return Err(FpxError::param(
                "model",
                "the multivariate approximation needs a conservative drift",
            ));
        }
        let kernel = MatrixKernel::new(theta)?;
        let mu_inf = model.mean_inf().to_vec();
        let ln_f_inf_mu = model.ln_f_inf(&mu_inf);
        let omega_form = select_omega_form(model, &kernel);
        Ok(ApproxNDContext {
            kernel,
            y0,
            model,
            mu_inf,
            ln_f_inf_mu,
            omega_form,
        })
    }

    pub fn from_model(model: &'a DriftModel, y0: Vec<f64>) -> Result<Self> {
        let theta = fisher::resolve_theta(model, None)?.theta;
        ApproxNDContext::new(model, theta, y0)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn omega_form(&self) -> OmegaForm {
        self.omega_form
    }

    /// Forces the line quadrature for `Omega`.
    pub fn with_quadrature_omega(mut self) -> Self {
        self.omega_form = OmegaForm::Quadrature;
        self
    }

    pub fn rho(&self, tau: f64) -> f64 {
        rho(&self.kernel, tau)
    }

    /// `ln Omega(tau, y)`.
    pub fn ln_omega(&self, tau: f64, y: &[f64]) -> Result<f64> {
        check_tau(tau)?;
        let d = linalg::sub(y, &self.mu_inf);
        if d.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        match self.omega_form {
            OmegaForm::OneDim => {
                let r = Relaxation::new(self.kernel.eigvals[0] * tau);
                Ok(r.p_over_one_plus_p * (self.model.ln_f_inf(y) - self.ln_f_inf_mu))
            }
            OmegaForm::SymmetricOu => {
                let a = match self.model.kind() {
                    ModelKind::Ou { generator, .. } => generator,
                    _ => unreachable!("symmetric OU form selected for a non-OU model"),
                };
                let am = a * self.kernel.mid_factor(tau);
                Ok(-0.5 * linalg::quad_form(&am, &d))
            }
            OmegaForm::StudentDiagonal => {
                let (a1, a2) = match self.model.kind() {
                    ModelKind::StudentT2 { a1, a2, .. } => (*a1, *a2),
                    _ => unreachable!("Student form selected for another model"),
                };
                let q1 = Relaxation::new(self.kernel.theta[(0, 0)] * tau).p_over_one_plus_p;
                let q2 = Relaxation::new(self.kernel.theta[(1, 1)] * tau).p_over_one_plus_p;
                let (s1, s2) = (a1 * d[0] * d[0], a2 * d[1] * d[1]);
                let exponent = (q1 * s1 + q2 * s2) / (s1 + s2);
                Ok(exponent * (self.model.ln_f_inf(y) - self.ln_f_inf_mu))
            }
            OmegaForm::Quadrature => self.ln_omega_by_quadrature(tau, y),
        }
    }

    /// `ln Omega` by adaptive Gauss–Legendre along the straight path.
    pub fn ln_omega_by_quadrature(&self, tau: f64, y: &[f64]) -> Result<f64> {
        check_tau(tau)?;
        let m = self.dim();
        let d = linalg::sub(y, &self.mu_inf);
        // w = M d, so the integrand is w . A(mu + s d) (M is symmetric).
        let w = linalg::mat_vec(&self.kernel.mid_factor(tau), &d);
        let bad = Cell::new(None);
        let mut x = vec![0.0; m];
        let mut a = vec![0.0; m];
        let value = integrate_adaptive(
            |s| {
                for i in 0..m {
                    x[i] = self.mu_inf[i] + s * d[i];
                }
                self.model.drift_into(&x, &mut a);
                let v = linalg::dot(&w, &a);
                if !v.is_finite() && bad.get().is_none() {
                    bad.set(Some(s));
                }
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            OMEGA_TOL,
            1e-15,
        )?;
        if let Some(s) = bad.get() {
            return Err(FpxError::NonFiniteIntegrand { s });
        }
        Ok(value)
    }

    pub fn omega(&self, tau: f64, y: &[f64]) -> Result<f64> {
        Ok(self.ln_omega(tau, y)?.exp())
    }

    fn ln_g_parts(&self, tau: f64, y: &[f64], ln_omega_y0: Option<f64>) -> Result<f64> {
        check_tau(tau)?;
        let m = self.dim();
        if y.len() != m {
            return Err(FpxError::DimensionMismatch {
                expected: m,
                got: y.len(),
            });
        }
        let d = linalg::sub(y, &self.y0);
        let mut ln_det = 0.0;
        let mut quad = 0.0;
        let mut rho_sum = 0.0;
        let mut ln_det_theta = 0.0;
        for k in 0..m {
            let l = self.kernel.eigvals[k];
            let r = Relaxation::new(l * tau);
            let u: f64 = (0..m).map(|i| self.kernel.eigvecs[(i, k)] * d[i]).sum();
            ln_det += r.ln_one_minus_q;
            quad += l * r.p_over_one_minus_q * u * u;
            rho_sum += r.p_over_one_plus_p;
            ln_det_theta += (l / (2.0 * PI)).ln();
        }
        let rho = rho_sum / m as f64;
        let start = match ln_omega_y0 {
            Some(v) => v,
            None => self.ln_omega(tau, &self.y0)?,
        };
        let omega = self.ln_omega(tau, y)? + start;
        Ok(-0.5 * ln_det - 0.5 * quad + rho * (ln_det_theta - 2.0 * self.ln_f_inf_mu) - omega)
    }

    pub fn ln_g_leading_nd(&self, tau: f64, y: &[f64]) -> Result<f64> {
        self.ln_g_parts(tau, y, None)
    }

    pub fn ln_f_leading_nd(&self, tau: f64, y: &[f64]) -> Result<f64> {
        Ok(self.ln_g_parts(tau, y, None)? + self.model.ln_f_inf(y))
    }

    /// [`Self::ln_f_leading_nd`] with `ln Omega(tau, y0)` supplied, for grid
    /// sweeps at a fixed time.
    pub fn ln_f_leading_nd_with_start(&self, tau: f64, y: &[f64], ln_omega_y0: f64) -> Result<f64> {
        Ok(self.ln_g_parts(tau, y, Some(ln_omega_y0))? + self.model.ln_f_inf(y))
    }

    pub fn g_leading_nd(&self, tau: f64, y: &[f64]) -> Result<f64> {
        exp_checked(self.ln_g_leading_nd(tau, y)?)
    }

    pub fn f_leading_nd(&self, tau: f64, y: &[f64]) -> Result<f64> {
        exp_checked(self.ln_f_leading_nd(tau, y)?)
    }

    /// Largest antisymmetric part of the Jacobian of `B = M A`, by central
    /// differences. It vanishes when `B` is a gradient.
    pub fn curl_defect(&self, tau: f64, y: &[f64]) -> Result<f64> {
        check_tau(tau)?;
        let m = self.dim();
        let mid = self.kernel.mid_factor(tau);
        let b = |x: &[f64]| linalg::mat_vec(&mid, &self.model.drift(x));
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let h = 1e-5 * (1.0 + y[j].abs());
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[j] += h;
            ym[j] -= h;
            let (bp, bm) = (b(&yp), b(&ym));
            for i in 0..m {
                jac[(i, j)] = (bp[i] - bm[i]) / (2.0 * h);
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..i {
                worst = worst.max((jac[(i, j)] - jac[(j, i)]).abs());
            }
        }
        Ok(worst)
    }
}

fn select_omega_form(model: &DriftModel, kernel: &MatrixKernel) -> OmegaForm {
    if model.dim() == 1 {
        return OmegaForm::OneDim;
    }
    match model.kind() {
        ModelKind::Ou { generator, .. } => {
            let commutator = generator * &kernel.theta - &kernel.theta * generator;
            if commutator.amax() <= 1e-12 * generator.amax().max(1.0) {
                OmegaForm::SymmetricOu
            } else {
                OmegaForm::Quadrature
            }
        }
        ModelKind::StudentT2 { .. } if kernel.theta[(0, 1)] == 0.0 && kernel.theta[(1, 0)] == 0.0 => {
            OmegaForm::StudentDiagonal
        }
        _ => OmegaForm::Quadrature,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx1d::Approx1DContext;
    use crate::exact::OuExact;
    use crate::models::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn diag(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
    }

    #[test]
    fn kernel_reconstruction_and_commutation() {
        let t = DMatrix::from_row_slice(2, 2, &[1.4, -0.3, -0.3, 0.8]);
        let k = MatrixKernel::new(t.clone()).unwrap();
        assert!((k.apply(|l| l) - &t).amax() < 1e-12);
        let q = k.q(0.7);
        assert!((&q * &t - &t * &q).amax() < 1e-10);
        let prod = k.q(0.3) * k.q(0.9);
        assert!((prod - k.q(1.2)).amax() < 1e-12);
    }

    #[test]
    fn kernel_rejects_nonsymmetric_and_indefinite() {
        let ns = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(MatrixKernel::new(ns), Err(FpxError::NotSymmetric { .. })));
        assert!(MatrixKernel::new(diag(1.0, -1.0)).is_err());
    }

    #[test]
    fn rho_values() {
        let k = MatrixKernel::new(diag(1.0, 3.0)).unwrap();
        assert_eq!(rho(&k, 0.0), 0.5);
        let e1 = (-1.0f64).exp();
        let e3 = (-3.0f64).exp();
        let expected = 0.5 * (e1 / (1.0 + e1) + e3 / (1.0 + e3));
        assert!((rho(&k, 1.0) - expected).abs() < 1e-15);
        assert!(rho(&k, 40.0) < 1e-10);
    }

    #[test]
    fn omega_one_dim_reduction() {
        let m = make_sech_power(1.0, 2.0).unwrap();
        let ctx = ApproxNDContext::from_model(&m, vec![-2.0]).unwrap();
        assert_eq!(ctx.omega_form(), OmegaForm::OneDim);
        for (tau, y) in [(0.1, 1.0), (1.0, -2.5), (3.0, 0.4)] {
            let closed = ctx.ln_omega(tau, &[y]).unwrap();
            let quad = ctx.ln_omega_by_quadrature(tau, &[y]).unwrap();
            assert!((closed.exp() - quad.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn omega_symmetric_ou_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let m = make_ou_nd(a, vec![0.0, 0.0]).unwrap();
        let ctx = ApproxNDContext::from_model(&m, vec![1.0, -1.0]).unwrap();
        assert_eq!(ctx.omega_form(), OmegaForm::SymmetricOu);
        for (tau, y) in [(0.2, [1.0, 2.0]), (1.5, [-2.0, 0.3])] {
            let closed = ctx.omega(tau, &y).unwrap();
            let quad = ctx.ln_omega_by_quadrature(tau, &y).unwrap().exp();
            assert!((closed - quad).abs() < 1e-10);
        }
        assert_eq!(ctx.omega(0.5, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn omega_student_closed_form() {
        let m = make_student_t_2d(1.0, 3.0, 5.0).unwrap();
        let ctx = ApproxNDContext::from_model(&m, vec![-2.0, 2.0]).unwrap();
        assert_eq!(ctx.omega_form(), OmegaForm::StudentDiagonal);
        for (tau, y) in [(0.1, [1.0, 2.0]), (1.0, [-3.0, 0.5]), (5.0, [0.2, -4.0])] {
            let closed = ctx.omega(tau, &y).unwrap();
            let quad = ctx.ln_omega_by_quadrature(tau, &y).unwrap().exp();
            assert!((closed - quad).abs() < 1e-8, "{closed} {quad}");
        }
    }

    #[test]
    fn ou_exactness_2d() {
        for a in [diag(1.0, 2.0), DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8])] {
            let m = make_ou_nd(a.clone(), vec![0.0, 0.0]).unwrap();
            let y0 = vec![1.0, -1.0];
            let ctx = ApproxNDContext::from_model(&m, y0.clone()).unwrap();
            let ex = OuExact::new(a, vec![0.0, 0.0]).unwrap();
            for tau in [0.1, 1.0, 5.0] {
                for i in 0..15 {
                    for j in 0..15 {
                        let y = [-3.5 + 0.5 * i as f64, -3.5 + 0.5 * j as f64];
                        let a = ctx.ln_f_leading_nd(tau, &y).unwrap();
                        let b = ex.ln_density(tau, &y, &y0).unwrap();
                        assert!((a - b).exp_m1().abs() < 1e-10, "tau={tau} y={y:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn separable_case_is_product_of_one_dim() {
        let m = make_ou_nd(diag(1.0, 2.0), vec![0.0, 0.0]).unwrap();
        let ctx = ApproxNDContext::from_model(&m, vec![0.5, -1.0]).unwrap();
        let m1 = make_ou_1d(1.0, 0.0).unwrap();
        let m2 = make_ou_1d(2.0, 0.0).unwrap();
        let c1 = Approx1DContext::from_model(&m1, 0.5).unwrap();
        let c2 = Approx1DContext::from_model(&m2, -1.0).unwrap();
        for (tau, y) in [(0.3, [0.0, 1.0]), (2.0, [-1.0, 0.2])] {
            let prod = c1.f_leading(tau, y[0]).unwrap() * c2.f_leading(tau, y[1]).unwrap();
            assert!(rel(ctx.f_leading_nd(tau, &y).unwrap(), prod) < 1e-10);
        }
        // Equal rates: the student model with a1 = a2 keeps theta proportional to I.
        let s = make_student_t_2d(1.0, 1.0, 6.0).unwrap();
        let cs = ApproxNDContext::from_model(&s, vec![1.0, 0.0]).unwrap();
        assert!(cs.curl_defect(0.5, &[0.3, -1.2]).unwrap() < 1e-8);
    }

    #[test]
    fn one_dim_embedding_matches_approx1d() {
        for m in [
            make_sech_power(1.0, 2.0).unwrap(),
            make_student_t_1d(0.5).unwrap(),
            make_double_well_1d([2.0, -2.0], [1.0, 1.0], 0.5f64.sqrt()).unwrap(),
        ] {
            let nd = ApproxNDContext::from_model(&m, vec![-1.2]).unwrap();
            let one = Approx1DContext::from_model(&m, -1.2).unwrap();
            for (tau, y) in [(0.05, -1.0), (0.5, 0.7), (4.0, 2.5)] {
                let a = nd.ln_f_leading_nd(tau, &[y]).unwrap();
                let b = one.ln_f_leading(tau, y).unwrap();
                assert!((a - b).exp_m1().abs() < 1e-12, "{}", m.id());
            }
        }
    }

    #[test]
    fn long_time_limits() {
        let s = make_student_t_2d(1.0, 3.0, 5.0).unwrap();
        let ctx = ApproxNDContext::from_model(&s, vec![-2.0, 2.0]).unwrap();
        let lmin = ctx.kernel.eigvals.min();
        for y in [[0.0, 0.0], [1.0, -2.0], [-3.0, 1.0]] {
            let g = ctx.g_leading_nd(40.0 / lmin, &y).unwrap();
            assert!((g - 1.0).abs() < 1e-10);
        }
        let mut prev = f64::INFINITY;
        for k in 0..6 {
            let tau = (5.0 + 2.0 * k as f64) / lmin;
            let mut sup: f64 = 0.0;
            for i in 0..9 {
                for j in 0..9 {
                    let y = [-4.0 + i as f64, -4.0 + j as f64];
                    sup = sup.max((ctx.f_leading_nd(tau, &y).unwrap() - s.f_inf(&y)).abs());
                }
            }
            assert!(sup < prev);
            prev = sup;
        }
    }

    #[test]
    fn short_time_heat_kernel() {
        let s = make_student_t_2d(1.0, 3.0, 5.0).unwrap();
        let y0 = vec![0.0, 0.0];
        let ctx = ApproxNDContext::from_model(&s, y0.clone()).unwrap();
        let tau = 1e-4 / ctx.kernel.eigvals.min();
        for i in -4..=4 {
            for j in -4..=4 {
                let y = [0.7 * i as f64 * tau.sqrt(), 0.7 * j as f64 * tau.sqrt()];
                let r2 = y[0] * y[0] + y[1] * y[1];
                let heat = (-r2 / (4.0 * tau)).exp() / (4.0 * PI * tau);
                assert!(rel(ctx.f_leading_nd(tau, &y).unwrap(), heat) < 1e-2);
            }
        }
    }

    #[test]
    fn curl_defect_is_first_order_in_tau() {
        let s = make_student_t_2d(1.0, 3.0, 5.0).unwrap();
        let ctx = ApproxNDContext::from_model(&s, vec![-2.0, 2.0]).unwrap();
        let y = [0.8, -0.6];
        // The defect is odd in tau, so fit intercept + tau + tau^3 + tau^5.
        let taus: [f64; 6] = [0.2, 0.15, 0.1, 0.075, 0.05, 0.025];
        let mut xtx = DMatrix::<f64>::zeros(4, 4);
        let mut xty = DVector::<f64>::zeros(4);
        for &t in &taus {
            let row = [1.0, t, t.powi(3), t.powi(5)];
            let d = ctx.curl_defect(t, &y).unwrap();
            for i in 0..4 {
                xty[i] += row[i] * d;
                for j in 0..4 {
                    xtx[(i, j)] += row[i] * row[j];
                }
            }
        }
        let coef = xtx.lu().solve(&xty).unwrap();
        assert!(coef[1] > 0.0);
        assert!(coef[0].abs() < 1e-6, "intercept {}", coef[0]);
        assert!(ctx.curl_defect(60.0, &y).unwrap() < 1e-12);
    }

    #[test]
    fn quadrature_omega_for_double_well() {
        let m = make_double_well_2d(DMatrix::identity(2, 2), [2.0, 0.0], [-2.0, 0.0], [1.0, 1.0], 0.5)
            .unwrap();
        let ctx = ApproxNDContext::from_model(&m, vec![0.0, 0.5]).unwrap();
        assert_eq!(ctx.omega_form(), OmegaForm::Quadrature);
        let v = ctx.f_leading_nd(1.0, &[1.0, 0.3]).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn nonconservative_model_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let m = make_ou_nd(a, vec![0.0, 0.0]).unwrap();
        assert!(ApproxNDContext::new(&m, DMatrix::identity(2, 2), vec![0.0, 0.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn reciprocity(y1 in -4.0f64..4.0, y2 in -4.0f64..4.0, z1 in -4.0f64..4.0, z2 in -4.0f64..4.0, tau in 0.05f64..5.0) {
            let s = make_student_t_2d(1.0, 3.0, 5.0).unwrap();
            let a = ApproxNDContext::from_model(&s, vec![z1, z2]).unwrap().ln_g_leading_nd(tau, &[y1, y2]).unwrap();
            let b = ApproxNDContext::from_model(&s, vec![y1, y2]).unwrap().ln_g_leading_nd(tau, &[z1, z2]).unwrap();
            prop_assert!((a - b).exp_m1().abs() < 1e-10);
        }

        #[test]
        fn positivity(y1 in -10.0f64..10.0, y2 in -10.0f64..10.0, tau in 0.05f64..10.0) {
            let s = make_student_t_2d(1.0, 3.0, 5.0).unwrap();
            let ctx = ApproxNDContext::from_model(&s, vec![-2.0, 2.0]).unwrap();
            let ln = ctx.ln_f_leading_nd(tau, &[y1, y2]).unwrap();
            prop_assert!(ln.is_finite());
        }
    }
}
