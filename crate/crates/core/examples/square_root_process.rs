//! Square-root process on the half-line: the exact Bessel-function density
//! and the leading-order h against the exact -d/dy ln g.

use fpx::exact;
use fpx::extensions::{sqrt_h_leading, SQRT_THETA};

fn main() -> fpx::error::Result<()> {
    let (nu, y0) = (1.5, 1.0);
    let ln_g = |tau: f64, y: f64| -> fpx::error::Result<f64> {
        Ok(exact::sqrt_process_ln_density(nu, tau, y, y0)? - exact::sqrt_process_ln_f_inf(nu, y))
    };
    for tau in [1e-3, 0.1, 1.0, 5.0] {
        println!("tau = {tau}");
        for y in [0.5, 0.9, 1.1, 2.0] {
            let step = 1e-6;
            let exact_h = -(ln_g(tau, y + step)? - ln_g(tau, y - step)?) / (2.0 * step);
            let approx = sqrt_h_leading(SQRT_THETA, nu, y0, tau, y)?;
            println!(
                "  y = {y:<4} density {:.6e}  h exact {exact_h:+.6e}  h leading {approx:+.6e}",
                exact::sqrt_process_density(nu, tau, y, y0)?
            );
        }
    }
    Ok(())
}
