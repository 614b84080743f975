//! Non-symmetric OU generator a = [[1, c], [0, 1]]: stationary covariance,
//! the equivalent symmetric generator and the closed-form H.

use fpx::exact::{self, NonConservativeOu};
use fpx::extensions::nonconservative_h;
use nalgebra::DMatrix;

fn main() -> fpx::error::Result<()> {
    let c = 1.0;
    let a = DMatrix::from_row_slice(2, 2, &[1.0, c, 0.0, 1.0]);
    let sigma = exact::lyapunov_sigma_inf(&a)?;
    println!("sigma_inf = {sigma}residual = {:.1e}", exact::lyapunov_residual(&a, &sigma));
    let symmetric = sigma.clone().try_inverse().expect("sigma_inf is positive definite");
    let report = exact::equivalence_class_check(&a, &symmetric)?;
    println!("symmetric representative = {symmetric}equivalent: {}, traces {} and {}", report.equivalent, report.trace1, report.trace2);

    let ou = NonConservativeOu::new(a.clone())?;
    let (y, y0) = ([0.4, -0.3], [1.0, 0.5]);
    for tau in [0.1, 1.0, 10.0] {
        let h = nonconservative_h(&a, &sigma, tau, &y, &y0)?;
        println!(
            "tau = {tau:<4} f = {:.6e}  H = [{:+.6}, {:+.6}]  cov = {:?}",
            ou.density(tau, &y, &y0)?,
            h[0],
            h[1],
            ou.covariance(tau).as_slice()
        );
    }
    Ok(())
}
