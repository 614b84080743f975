//! The reversion speed `theta = <-grad A>` for every model in the catalog,
//! as a closed form where one exists and by quadrature.

use fpx::fisher;
use fpx::models::{self, DriftModel};
use nalgebra::DMatrix;

fn show(name: &str, model: &DriftModel) -> fpx::error::Result<()> {
    let quad = fisher::estimate_theta(model)?;
    let used = fisher::resolve_theta(model, None)?;
    let fmt = |m: &DMatrix<f64>| {
        let rows: Vec<String> = m
            .row_iter()
            .map(|r| r.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", "))
            .collect();
        format!("[{}]", rows.join("; "))
    };
    println!(
        "{name:<22} quadrature {:<34} used {:<34} ({:?}), K = {:.4}",
        fmt(&quad.theta),
        fmt(&used.theta),
        used.source,
        model.norm_const()
    );
    Ok(())
}

fn main() -> fpx::error::Result<()> {
    let i2 = DMatrix::identity(2, 2);
    show("sech-power (1, 2)", &models::make_sech_power(1.0, 2.0)?)?;
    show("dry friction", &models::make_dry_friction())?;
    show("Student-t (1/2)", &models::make_student_t_1d(0.5)?)?;
    show("double well 1D", &models::make_double_well_1d([2.0, -2.0], [1.0, 1.0], 0.5f64.sqrt())?)?;
    show("bivariate Student", &models::make_student_t_2d(1.0, 3.0, 10.0)?)?;
    show("double well 2D (a)", &models::make_double_well_2d(i2.clone(), [2.0, 0.0], [-2.0, 0.0], [1.0, 1.0], 0.5)?)?;
    show("double well 2D (b)", &models::make_double_well_2d(i2, [2.0, 2.0], [-2.0, -2.0], [1.0, 0.7], 1.0)?)?;
    Ok(())
}
