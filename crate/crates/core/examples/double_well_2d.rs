//! Bivariate double well (case a) started between the wells: the leading
//! order against the spectral solver at the figure times.

use fpx::experiment::{self, Method};

fn main() -> fpx::error::Result<()> {
    let mut spec = experiment::preset("fig-dw1mid")?;
    // A coarser solver grid keeps the example quick.
    let solver = spec.solver.as_mut().expect("preset has a solver");
    solver.modes = vec![128, 128];
    solver.ic_width = 0.25;
    let eval = experiment::evaluate(&spec, None)?;
    let s = &eval.summary;
    println!("theta = {:?} ({})", s.theta.as_ref().unwrap(), s.theta_source.as_deref().unwrap());
    for (tau, l1) in s.l1_series(Method::Approx.tag()) {
        println!("tau = {tau:<4} L1(approx, solver) = {l1:.4}");
    }
    println!("timings (s): {:?}", s.timings);
    Ok(())
}
