//! The leading-order density reproduces the Ornstein-Uhlenbeck transition
//! density exactly, in one and two dimensions.

use fpx::approx1d::Approx1DContext;
use fpx::approxnd::ApproxNDContext;
use fpx::exact;
use fpx::models;
use nalgebra::DMatrix;

fn main() -> fpx::error::Result<()> {
    let (theta, y0) = (1.0, 2.0);
    let ou = models::make_ou_1d(theta, 0.0)?;
    let ctx = Approx1DContext::new(&ou, theta, y0)?;
    println!("1D OU, theta = {theta}, y0 = {y0}");
    println!("{:>6} {:>6} {:>22} {:>22}", "tau", "y", "leading order", "exact");
    for tau in [0.01, 0.1, 1.0, 5.0] {
        for y in [-1.0, 0.5, 2.0] {
            let approx = ctx.f_leading(tau, y)?;
            let exact = exact::ou_density_1d(theta, 0.0, tau, y, y0)?;
            println!("{tau:>6} {y:>6} {approx:>22.15e} {exact:>22.15e}");
        }
    }

    let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 1.0]);
    let ou2 = models::make_ou_nd(a.clone(), vec![0.0, 0.0])?;
    let y0 = vec![1.0, -0.5];
    let ctx = ApproxNDContext::new(&ou2, a.clone(), y0.clone())?;
    println!("\n2D OU, a = [[1.5, 0.5], [0.5, 1]], y0 = {y0:?}");
    for tau in [0.1, 1.0] {
        let y = [0.3, 0.2];
        let approx = ctx.f_leading_nd(tau, &y)?;
        let exact = exact::ou_density_nd(&a, tau, &y, &y0)?;
        println!("tau = {tau}: leading order {approx:.15e}, exact {exact:.15e}, rho = {:.6}", ctx.rho(tau));
    }
    Ok(())
}
