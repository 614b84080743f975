//! Sech-power model started at y0 = -2: leading-order density and its
//! b1-corrected h against the spectral solver.

use fpx::approx1d::Approx1DContext;
use fpx::metrics::{l1_error, DensityField, FieldMeta};
use fpx::models;
use fpx::solver::{solve_fpe, SolverConfig};

fn main() -> fpx::error::Result<()> {
    let model = models::make_sech_power(1.0, 2.0)?;
    let y0 = -2.0;
    let ctx = Approx1DContext::from_model(&model, y0)?;
    println!("theta = {}", ctx.theta);
    let times = [0.25, 0.5, 1.0, 2.0, 5.0];
    let cfg = SolverConfig::new_1d(16.0, 1024, 5e-3, 0.1);
    let solved = solve_fpe(&model, &[y0], &times, &cfg)?;
    for f in &solved {
        let meta = FieldMeta {
            model: "sech".into(),
            y0: vec![y0],
            method: "approx".into(),
        };
        let approx = DensityField::from_fn(f.axes.clone(), f.tau, meta, |y| ctx.f_leading(f.tau, y[0]))?;
        let y = 0.0;
        println!(
            "tau = {:<5} L1 = {:.4}  mass(approx) = {:.5}  h({y}) leading = {:+.4}, with b1 = {:+.4}",
            f.tau,
            l1_error(&approx, f)?,
            approx.mass(),
            ctx.h_leading(f.tau, y)?,
            ctx.h_with_b1(f.tau, y)?
        );
    }
    Ok(())
}
