//! Bivariate Student-t model: leading-order density on a grid, its rho(tau)
//! and the line integral Omega in closed form and by quadrature.

use fpx::approxnd::ApproxNDContext;
use fpx::fisher;
use fpx::metrics::{uniform_axis, DensityField, FieldMeta};
use fpx::models;

fn main() -> fpx::error::Result<()> {
    let model = models::make_student_t_2d(1.0, 3.0, 10.0)?;
    let theta = fisher::resolve_theta(&model, None)?.theta;
    let y0 = vec![-2.0, 2.0];
    let ctx = ApproxNDContext::new(&model, theta.clone(), y0.clone())?;
    println!("theta = {theta}Omega form: {:?}", ctx.omega_form());
    let quad = ApproxNDContext::new(&model, theta, y0.clone())?.with_quadrature_omega();
    let y = [0.7, -0.4];
    println!(
        "ln Omega(1, {y:?}): closed form {:.12}, quadrature {:.12}",
        ctx.ln_omega(1.0, &y)?,
        quad.ln_omega(1.0, &y)?
    );
    let axis = uniform_axis(-8.0, 8.0, 161);
    for tau in [0.1, 0.25, 1.0, 5.0] {
        let meta = FieldMeta {
            model: "student2d".into(),
            y0: y0.clone(),
            method: "approx".into(),
        };
        let f = DensityField::from_fn(vec![axis.clone(), axis.clone()], tau, meta, |y| ctx.f_leading_nd(tau, y))?;
        println!("tau = {tau:<5} rho = {:.4}  mass = {:.5}  peak = {:.4}", ctx.rho(tau), f.mass(), f.max_value());
    }
    Ok(())
}
