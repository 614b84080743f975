//! Exact transition densities used as references: OU (1D and symmetric
//! multivariate), dry friction, the square-root process and the
//! non-conservative OU process.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{FpxError, Result};
use crate::linalg;
use crate::special::{ln_bessel_i, ln_gamma, normal_cdf, Relaxation};

fn require_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(FpxError::param("tau", format!("must be positive, got {tau}")))
    }
}

/// Exact OU process `A(y) = -a (y - mean)` with a symmetric positive-definite
/// generator `a`.
#[derive(Debug, Clone)]
pub struct OuExact {
    generator: DMatrix<f64>,
    mean: Vec<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl OuExact {
    pub fn new(a: DMatrix<f64>, mean: Vec<f64>) -> Result<Self> {
        linalg::require_symmetric(&a, 1e-12)?;
        if mean.len() != a.nrows() {
            return Err(FpxError::DimensionMismatch {
                expected: a.nrows(),
                got: mean.len(),
            });
        }
        let eig = linalg::sym_eigen(&a);
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(FpxError::param("a", "generator must be positive definite"));
        }
        Ok(OuExact {
            generator: a,
            mean,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
        })
    }

    pub fn one_dim(theta: f64, y_inf: f64) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(FpxError::param("theta", "must be positive"));
        }
        OuExact::new(DMatrix::from_element(1, 1, theta), vec![y_inf])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// Conditional mean `mean + e^{-a tau}(y0 - mean)`.
    pub fn mean_at(&self, tau: f64, y0: &[f64]) -> Vec<f64> {
        let e = linalg::apply_spectral(&self.eigvecs, &self.eigvals, |l| (-l * tau).exp());
        let d = linalg::sub(y0, &self.mean);
        let m = linalg::mat_vec(&e, &d);
        m.iter().zip(&self.mean).map(|(a, b)| a + b).collect()
    }

    /// `ln f(tau, y | y0)` for a start distributed as a Gaussian of standard
    /// deviation `ic_width` around `y0` (zero gives the point start).
    pub fn ln_density_from_gaussian(
        &self,
        tau: f64,
        y: &[f64],
        y0: &[f64],
        ic_width: f64,
    ) -> Result<f64> {
        require_tau(tau)?;
        let m = self.dim();
        if y.len() != m || y0.len() != m {
            return Err(FpxError::DimensionMismatch {
                expected: m,
                got: y.len().min(y0.len()),
            });
        }
        let mu = self.mean_at(tau, y0);
        let d = linalg::sub(y, &mu);
        // Work in the eigenbasis, where the covariance is diagonal.
        let z: Vec<f64> = (0..m)
            .map(|k| (0..m).map(|i| self.eigvecs[(i, k)] * d[i]).sum())
            .collect();
        let eps2 = ic_width * ic_width;
        let mut ln = -0.5 * m as f64 * (2.0 * PI).ln();
        for k in 0..m {
            let l = self.eigvals[k];
            let r = Relaxation::new(l * tau);
            let ln_var = if eps2 == 0.0 {
                r.ln_one_minus_q - l.ln()
            } else {
                (r.one_minus_q / l + eps2 * (-2.0 * l * tau).exp()).ln()
            };
            ln -= 0.5 * ln_var + 0.5 * z[k] * z[k] * (-ln_var).exp();
        }
        Ok(ln)
    }

    pub fn ln_density(&self, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
        self.ln_density_from_gaussian(tau, y, y0, 0.0)
    }

    pub fn density(&self, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
        Ok(self.ln_density(tau, y, y0)?.exp())
    }

    /// `ln f_inf(y)`.
    pub fn ln_f_inf(&self, y: &[f64]) -> f64 {
        let d = linalg::sub(y, &self.mean);
        let ln_det: f64 = self.eigvals.iter().map(|l| l.ln()).sum();
        0.5 * ln_det - 0.5 * self.dim() as f64 * (2.0 * PI).ln()
            - 0.5 * linalg::quad_form(&self.generator, &d)
    }

    /// `g = f / f_inf`.
    pub fn g(&self, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
        Ok((self.ln_density(tau, y, y0)? - self.ln_f_inf(y)).exp())
    }

    /// `ln g` in the symmetric kernel form
    /// `-1/2 ln|I-q| - 1/2 [ d^T (a q/(I-q)) d - 2 d^T (a sqrt(q)/(I-q)) d0 + d0^T (a q/(I-q)) d0 ]`
    /// with deviations measured from the mean.
    pub fn ln_g_kernel(&self, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
        require_tau(tau)?;
        let m = self.dim();
        let d = linalg::sub(y, &self.mean);
        let d0 = linalg::sub(y0, &self.mean);
        let mut ln = 0.0;
        for k in 0..m {
            let l = self.eigvals[k];
            let r = Relaxation::new(l * tau);
            let u: f64 = (0..m).map(|i| self.eigvecs[(i, k)] * d[i]).sum();
            let u0: f64 = (0..m).map(|i| self.eigvecs[(i, k)] * d0[i]).sum();
            let pq = r.p_over_one_minus_q;
            ln += -0.5 * r.ln_one_minus_q
                - 0.5 * l * pq * (r.p * u * u - 2.0 * u * u0 + r.p * u0 * u0);
        }
        Ok(ln)
    }
}

/// 1D OU density with mean `y_inf + (y0 - y_inf) e^{-theta tau}` and variance
/// `(1 - e^{-2 theta tau}) / theta`.
pub fn ou_density_1d(theta: f64, y_inf: f64, tau: f64, y: f64, y0: f64) -> Result<f64> {
    OuExact::one_dim(theta, y_inf)?.density(tau, &[y], &[y0])
}

/// Symmetric multivariate OU density with zero mean.
pub fn ou_density_nd(a: &DMatrix<f64>, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
    OuExact::new(a.clone(), vec![0.0; a.nrows()])?.density(tau, y, y0)
}

/// Dry-friction transition density.
pub fn dryfric_density(tau: f64, y: f64, y0: f64) -> Result<f64> {
    require_tau(tau)?;
    let first = dryfric_first_term_ln_f(tau, y, y0).exp();
    let second = 0.5 * (-y.abs()).exp() * dryfric_phi(tau, y, y0);
    Ok(first + second)
}

/// Dry-friction `g = f / f_inf`.
pub fn dryfric_g(tau: f64, y: f64, y0: f64) -> Result<f64> {
    require_tau(tau)?;
    Ok(dryfric_g_first_term(tau, y, y0)? + dryfric_phi(tau, y, y0))
}

/// The Gaussian (first) term of the dry-friction `g`.
pub fn dryfric_g_first_term(tau: f64, y: f64, y0: f64) -> Result<f64> {
    require_tau(tau)?;
    let d = y - y0;
    Ok((-d * d / (4.0 * tau) - 0.25 * tau + 0.5 * (y0.abs() + y.abs())).exp() / (PI * tau).sqrt())
}

fn dryfric_first_term_ln_f(tau: f64, y: f64, y0: f64) -> f64 {
    let d = y - y0;
    -d * d / (4.0 * tau) - 0.5 * (4.0 * PI * tau).ln() - 0.25 * tau + 0.5 * (y0.abs() - y.abs())
}

fn dryfric_phi(tau: f64, y: f64, y0: f64) -> f64 {
    normal_cdf((tau - y.abs() - y0.abs()) / (2.0 * tau).sqrt())
}

fn require_positive_state(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FpxError::param(name, format!("state must be positive, got {v}")))
    }
}

/// `ln f` of the square-root process in its rescaled form
/// `f_inf = y^{nu-1} e^{-y} / Gamma(nu)`.
pub fn sqrt_process_ln_density(nu: f64, tau: f64, y: f64, y0: f64) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(FpxError::param("nu", "must be positive"));
    }
    require_tau(tau)?;
    require_positive_state("y", y)?;
    require_positive_state("y0", y0)?;
    let one_minus = -(-tau).exp_m1();
    let e = (-tau).exp();
    let z = 2.0 * (y * y0 * e).sqrt() / one_minus;
    Ok(-y - one_minus.ln() + 0.5 * (nu - 1.0) * (y.ln() + tau - y0.ln())
        - (y + y0) * e / one_minus
        + ln_bessel_i(nu - 1.0, z))
}

pub fn sqrt_process_density(nu: f64, tau: f64, y: f64, y0: f64) -> Result<f64> {
    Ok(sqrt_process_ln_density(nu, tau, y, y0)?.exp())
}

/// `ln f_inf` of the square-root process (Gamma(nu) density).
pub fn sqrt_process_ln_f_inf(nu: f64, y: f64) -> f64 {
    (nu - 1.0) * y.ln() - y - ln_gamma(nu)
}

/// Checks that every eigenvalue of `a` has a positive real part.
pub fn require_stable(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(FpxError::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    for ev in a.complex_eigenvalues().iter() {
        if ev.re <= 0.0 {
            return Err(FpxError::UnstableGenerator {
                re: ev.re,
                im: ev.im,
            });
        }
    }
    Ok(())
}

/// Solves `a s + s a^T = 2 I` for symmetric `s` as a linear system in the
/// `m(m+1)/2` independent entries.
pub fn lyapunov_sigma_inf(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_stable(a)?;
    let m = a.nrows();
    let mut index = vec![vec![0usize; m]; m];
    let mut n = 0;
    for i in 0..m {
        for j in i..m {
            index[i][j] = n;
            index[j][i] = n;
            n += 1;
        }
    }
    let mut lhs = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..m {
        for j in i..m {
            let row = index[i][j];
            for k in 0..m {
                // (a s)_{ij} = a_ik s_kj ; (s a^T)_{ij} = s_ik a_jk
                lhs[(row, index[k][j])] += a[(i, k)];
                lhs[(row, index[i][k])] += a[(j, k)];
            }
            if i == j {
                rhs[row] = 2.0;
            }
        }
    }
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| FpxError::Singular("Lyapunov system".into()))?;
    Ok(DMatrix::from_fn(m, m, |i, j| sol[index[i][j]]))
}

/// Max-entry residual of the Lyapunov equation.
pub fn lyapunov_residual(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    (a * sigma + sigma * a.transpose() - 2.0 * DMatrix::<f64>::identity(m, m)).amax()
}

/// OU process with a general stable generator, `dY = -a Y dtau + sqrt(2) dW`.
#[derive(Debug, Clone)]
pub struct NonConservativeOu {
    pub a: DMatrix<f64>,
    pub sigma_inf: DMatrix<f64>,
}

impl NonConservativeOu {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let sigma_inf = lyapunov_sigma_inf(&a)?;
        Ok(NonConservativeOu { a, sigma_inf })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn residual(&self) -> f64 {
        lyapunov_residual(&self.a, &self.sigma_inf)
    }

    /// `e^{-a tau} y0`.
    pub fn mean(&self, tau: f64, y0: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&linalg::expm(&(-tau * &self.a)), y0)
    }

    /// `sigma_inf - e^{-a tau} sigma_inf e^{-a^T tau}`.
    pub fn covariance(&self, tau: f64) -> DMatrix<f64> {
        let e = linalg::expm(&(-tau * &self.a));
        &self.sigma_inf - &e * &self.sigma_inf * e.transpose()
    }

    pub fn ln_density(&self, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
        require_tau(tau)?;
        let m = self.dim();
        let sigma = self.covariance(tau);
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| FpxError::Singular("transition covariance".into()))?;
        let d = DVector::from_vec(linalg::sub(y, &self.mean(tau, y0)));
        let sol = chol.solve(&d);
        let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(-0.5 * (m as f64 * (2.0 * PI).ln() + ln_det) - 0.5 * d.dot(&sol))
    }

    pub fn density(&self, tau: f64, y: &[f64], y0: &[f64]) -> Result<f64> {
        Ok(self.ln_density(tau, y, y0)?.exp())
    }

    pub fn ln_f_inf(&self, y: &[f64]) -> Result<f64> {
        let m = self.dim();
        let chol = self
            .sigma_inf
            .clone()
            .cholesky()
            .ok_or_else(|| FpxError::Singular("stationary covariance".into()))?;
        let v = DVector::from_column_slice(y);
        let sol = chol.solve(&v);
        let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(-0.5 * (m as f64 * (2.0 * PI).ln() + ln_det) - 0.5 * v.dot(&sol))
    }
}

/// Comparison of two generators by their stationary covariances.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub max_sigma_difference: f64,
    pub trace1: f64,
    pub trace2: f64,
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
}

/// Two stable generators are equivalent when they share `sigma_inf`
/// (tolerance `1e-8`); equivalent generators share their trace.
pub fn equivalence_class_check(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<EquivalenceReport> {
    let sigma1 = lyapunov_sigma_inf(a1)?;
    let sigma2 = lyapunov_sigma_inf(a2)?;
    if sigma1.shape() != sigma2.shape() {
        return Err(FpxError::DimensionMismatch {
            expected: sigma1.nrows(),
            got: sigma2.nrows(),
        });
    }
    let diff = (&sigma1 - &sigma2).amax();
    Ok(EquivalenceReport {
        equivalent: diff < 1e-8,
        max_sigma_difference: diff,
        trace1: a1.trace(),
        trace2: a2.trace(),
        sigma1,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Rule1D;

    fn gaussian(x: f64, mean: f64, var: f64) -> f64 {
        (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn ou_1d_direct_substitution() {
        let tau = 2f64.ln();
        for y in [-1.0, 0.3, 1.0, 2.5] {
            let got = ou_density_1d(1.0, 0.0, tau, y, 2.0).unwrap();
            assert!((got / gaussian(y, 1.0, 0.75) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn ou_1d_long_time_and_domain_errors() {
        let got = ou_density_1d(2.0, 1.0, 40.0, 1.7, -3.0).unwrap();
        assert!((got / gaussian(1.7, 1.0, 0.5) - 1.0).abs() < 1e-12);
        assert!(ou_density_1d(1.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ou_density_1d(-1.0, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn ou_h_is_the_known_linear_form() {
        // h = theta sqrt(q)(y - y0)/(1-q) + sqrt(q)/(1+sqrt(q)) theta (y_inf - y)
        let (theta, y_inf, tau, y0) = (1.3, 0.4, 0.7, -1.0);
        let ou = OuExact::one_dim(theta, y_inf).unwrap();
        let p = (-theta * tau).exp();
        for y in [-2.0, 0.0, 1.5] {
            let step = 1e-4;
            let lg = |v: f64| ou.g(tau, &[v], &[y0]).unwrap().ln();
            let fd = -(lg(y + step) - lg(y - step)) / (2.0 * step);
            let h = theta * p * (y - y0) / (1.0 - p * p) + p / (1.0 + p) * theta * (y_inf - y);
            assert!((fd - h).abs() < 1e-8, "{fd} {h}");
        }
    }

    #[test]
    fn ou_nd_identity_generator_is_a_product() {
        let a = DMatrix::identity(2, 2);
        let (tau, y, y0) = (0.6, [0.3, -1.2], [1.0, 0.5]);
        let got = ou_density_nd(&a, tau, &y, &y0).unwrap();
        let p = ou_density_1d(1.0, 0.0, tau, y[0], y0[0]).unwrap()
            * ou_density_1d(1.0, 0.0, tau, y[1], y0[1]).unwrap();
        assert!((got / p - 1.0).abs() < 1e-13);
    }

    #[test]
    fn ou_nd_kernel_form_equals_density_ratio() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let ou = OuExact::new(a, vec![0.0, 0.0]).unwrap();
        for tau in [0.05, 0.5, 3.0] {
            for i in 0..5 {
                for j in 0..5 {
                    let y = [-2.0 + i as f64, -2.0 + j as f64];
                    let y0 = [0.7, -0.4];
                    let a = ou.ln_density(tau, &y, &y0).unwrap() - ou.ln_f_inf(&y);
                    let b = ou.ln_g_kernel(tau, &y, &y0).unwrap();
                    assert!((a.exp() / b.exp() - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ou_nd_determinant_matches_covariance() {
        // |2 pi sigma|^{-1/2} at the mean, with sigma = a^{-1}(I - q) formed directly.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let tau = 0.3;
        let q = linalg::expm(&(-2.0 * tau * &a));
        let sigma = a.clone().try_inverse().unwrap() * (DMatrix::identity(2, 2) - q);
        let ou = OuExact::new(a, vec![0.0, 0.0]).unwrap();
        let y0 = [1.0, 1.0];
        let mu = ou.mean_at(tau, &y0);
        let got = ou.density(tau, &mu, &y0).unwrap();
        let expected = 1.0 / (2.0 * PI * sigma.determinant().sqrt());
        assert!((got / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ou_nd_rejects_nonsymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            ou_density_nd(&a, 1.0, &[0.0, 0.0], &[0.0, 0.0]),
            Err(FpxError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn dryfric_examples() {
        let v = dryfric_density(1.0, 0.0, 0.0).unwrap();
        let expected = (-0.25f64).exp() / (4.0 * PI).sqrt() + 0.5 * normal_cdf(1.0 / 2f64.sqrt());
        assert!((v - expected).abs() < 1e-15);
        let late = dryfric_density(400.0, 1.3, -2.0).unwrap();
        assert!((late - 0.5 * (-1.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dryfric_integrates_to_one() {
        for tau in [0.1, 1.0, 10.0] {
            let y0 = -2.0;
            let lo = Rule1D::uniform(-80.0, 0.0, 400).integrate(|y| dryfric_density(tau, y, y0).unwrap());
            let hi = Rule1D::uniform(0.0, 80.0, 400).integrate(|y| dryfric_density(tau, y, y0).unwrap());
            assert!((lo + hi - 1.0).abs() < 1e-8, "tau={tau}: {}", lo + hi);
        }
    }

    #[test]
    fn dryfric_g_form_equals_ratio() {
        for (tau, y, y0) in [(0.2, 0.5, -1.0), (1.0, -3.0, 2.0), (5.0, 0.0, 0.1)] {
            let ratio = dryfric_density(tau, y, y0).unwrap() / (0.5 * (-f64::abs(y)).exp());
            let g = dryfric_g(tau, y, y0).unwrap();
            assert!((ratio / g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let rule_split = |f: &dyn Fn(f64) -> f64| {
            Rule1D::uniform(-40.0, 0.0, 200).integrate(f) + Rule1D::uniform(0.0, 40.0, 200).integrate(f)
        };
        let (t1, t2, y, y0) = (0.4, 0.7, 0.8, -1.5);
        let ck = rule_split(&|z| {
            ou_density_1d(1.2, 0.3, t1, z, y0).unwrap() * ou_density_1d(1.2, 0.3, t2, y, z).unwrap()
        });
        let direct = ou_density_1d(1.2, 0.3, t1 + t2, y, y0).unwrap();
        assert!((ck - direct).abs() < 1e-5);
        let ck = rule_split(&|z| {
            dryfric_density(t1, z, y0).unwrap() * dryfric_density(t2, y, z).unwrap()
        });
        let direct = dryfric_density(t1 + t2, y, y0).unwrap();
        assert!((ck - direct).abs() < 1e-5, "{ck} {direct}");
    }

    #[test]
    fn sqrt_process_half_order_oracle() {
        // nu = 3/2 gives I_{1/2}(z) = sqrt(2/(pi z)) sinh z.
        let (nu, tau, y, y0) = (1.5_f64, 1.0_f64, 1.0_f64, 1.0_f64);
        let e = (-tau).exp();
        let om = 1.0 - e;
        let z = 2.0 * (y * y0 * e).sqrt() / om;
        let bessel = (2.0 / (PI * z)).sqrt() * z.sinh();
        let expected = (-y).exp() / om * (y * tau.exp() / y0).powf(0.25)
            * (-(y + y0) * e / om).exp()
            * bessel;
        let got = sqrt_process_density(nu, tau, y, y0).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sqrt_process_normalized_and_relaxes() {
        for nu in [1.5, 3.0] {
            for tau in [0.1, 1.0] {
                let y0 = 1.2;
                // y = t^2 removes the y^{nu-1} behaviour at the origin.
                let total = Rule1D::uniform(0.0, 9.0, 300).integrate(|t| {
                    if t <= 0.0 {
                        0.0
                    } else {
                        2.0 * t * sqrt_process_density(nu, tau, t * t, y0).unwrap()
                    }
                });
                assert!((total - 1.0).abs() < 1e-7, "nu={nu} tau={tau}: {total}");
            }
        }
        let late = sqrt_process_ln_density(2.5, 60.0, 1.7, 0.4).unwrap();
        assert!((late - sqrt_process_ln_f_inf(2.5, 1.7)).abs() < 1e-10);
        assert!(sqrt_process_density(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn lyapunov_jordan_example() {
        let c = 0.8;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, c, 0.0, 1.0]);
        let s = lyapunov_sigma_inf(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 + c * c / 2.0, -c / 2.0, -c / 2.0, 1.0]);
        assert!((&s - expected).amax() < 1e-14);
        assert!(lyapunov_residual(&a, &s) < 1e-12);
    }

    #[test]
    fn lyapunov_symmetric_and_identity() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5]);
        let s = lyapunov_sigma_inf(&a).unwrap();
        assert!((s - a.try_inverse().unwrap()).amax() < 1e-13);
        let s = lyapunov_sigma_inf(&DMatrix::identity(2, 2)).unwrap();
        assert!((s - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            lyapunov_sigma_inf(&a),
            Err(FpxError::UnstableGenerator { .. })
        ));
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(lyapunov_sigma_inf(&a).is_err());
    }

    #[test]
    fn nonconservative_covariance_display() {
        // For a = [[1,c],[0,1]]: sigma_22 = 1 - e^{-2 tau},
        // sigma_12 = -c/2 + e^{-2 tau}(c/2 + c tau),
        // sigma_11 = 1 + c^2/2 - e^{-2 tau}(1 + c^2/2 + c^2 tau + c^2 tau^2).
        let c = 1.3;
        let a = DMatrix::from_row_slice(2, 2, &[1.0, c, 0.0, 1.0]);
        let ou = NonConservativeOu::new(a).unwrap();
        for tau in [0.1, 0.9, 3.0] {
            let s = ou.covariance(tau);
            let e2 = (-2.0 * tau).exp();
            assert!((s[(1, 1)] - (1.0 - e2)).abs() < 1e-12);
            let s12 = -c / 2.0 + e2 * (c / 2.0 + c * tau);
            assert!((s[(0, 1)] - s12).abs() < 1e-12);
            let s11 = 1.0 + c * c / 2.0 - e2 * (1.0 + c * c / 2.0 + c * c * tau + c * c * tau * tau);
            assert!((s[(0, 0)] - s11).abs() < 1e-12);
        }
        let s = ou.covariance(60.0);
        assert!((s - &ou.sigma_inf).amax() < 1e-12);
    }

    #[test]
    fn nonconservative_matches_symmetric_ou() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let nc = NonConservativeOu::new(a.clone()).unwrap();
        let sym = OuExact::new(a, vec![0.0, 0.0]).unwrap();
        for tau in [0.2, 1.0] {
            let (y, y0) = ([0.3, -0.8], [1.0, 1.0]);
            let x = nc.density(tau, &y, &y0).unwrap();
            let z = sym.density(tau, &y, &y0).unwrap();
            assert!((x / z - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn equivalence_examples() {
        let c: f64 = 1.0;
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, c, 0.0, 1.0]);
        let k = 1.0 / (1.0 + c * c / 4.0);
        let a2 = DMatrix::from_row_slice(2, 2, &[k, k * c / 2.0, k * c / 2.0, k * (1.0 + c * c / 2.0)]);
        let r = equivalence_class_check(&a1, &a2).unwrap();
        assert!(r.equivalent);
        assert!((r.trace1 - 2.0).abs() < 1e-15 && (r.trace2 - 2.0).abs() < 1e-14);
        let r = equivalence_class_check(&DMatrix::identity(2, 2), &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
        assert!(!r.equivalent);
    }

    #[test]
    fn skew_perturbation_preserves_class() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let s = lyapunov_sigma_inf(&a).unwrap();
        let s_inv = s.clone().try_inverse().unwrap();
        for w in [0.3, -0.7, 1.1] {
            let u = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
            let b = &a + &u * &s_inv;
            let r = equivalence_class_check(&a, &b).unwrap();
            assert!(r.equivalent, "w={w}: {}", r.max_sigma_difference);
            assert!((r.trace1 - r.trace2).abs() < 1e-12);
        }
    }
}
