//! Spectral solver checks: OU against the smoothed exact density, a
//! mode-doubling study and the fourth-order time-step ratio.

use fpx::exact::OuExact;
use fpx::metrics::{l1_error, DensityField};
use fpx::models;
use fpx::solver::{mode_doubling_study, solve_fpe, SolverConfig};

fn main() -> fpx::error::Result<()> {
    let ou = models::make_ou_1d(1.0, 0.0)?;
    let ex = OuExact::one_dim(1.0, 0.0)?;
    let (y0, eps) = (2.0, 0.2);
    let cfg = SolverConfig::new_1d(10.0, 256, 1e-3, eps);
    for f in solve_fpe(&ou, &[y0], &[0.1, 1.0, 5.0], &cfg)? {
        let exact = DensityField::from_fn(f.axes.clone(), f.tau, f.meta.clone(), |y| {
            Ok(ex.ln_density_from_gaussian(f.tau, y, &[y0], eps)?.exp())
        })?;
        println!("OU tau = {:<4} L1 to exact = {:.2e}", f.tau, l1_error(&f, &exact)?);
    }

    let dw = models::make_double_well_1d([2.0, -2.0], [1.0, 1.0], 0.5f64.sqrt())?;
    let mut cfg = SolverConfig::new_1d(10.0, 256, 2e-3, 0.2);
    cfg.conv_tol = 1e-6;
    let study = mode_doubling_study(&dw, &[0.5], 1.0, &cfg)?;
    println!("double well: modes {:?}, differences {:?}, accepted {}", study.modes, study.differences.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(), study.accepted);

    let sech = models::make_sech_power(1.0, 2.0)?;
    let run = |dt: f64| -> fpx::error::Result<DensityField> {
        let c = SolverConfig::new_1d(16.0, 256, dt, 0.3);
        Ok(solve_fpe(&sech, &[-2.0], &[1.0], &c)?.remove(0))
    };
    let (a, b, c) = (run(0.04)?, run(0.02)?, run(0.01)?);
    println!("RK4 ratio under dt halving: {:.2}", l1_error(&a, &b)? / l1_error(&b, &c)?);
    Ok(())
}
