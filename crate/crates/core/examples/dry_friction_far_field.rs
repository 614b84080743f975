//! Dry friction: the far-field expansion coincides with the first term of
//! the exact normalized density, and beats the leading order far out.

use fpx::approx1d::Approx1DContext;
use fpx::exact;
use fpx::extensions::FarFieldContext;
use fpx::models;

fn main() -> fpx::error::Result<()> {
    let model = models::make_dry_friction();
    let y0 = -2.0;
    let far = FarFieldContext::new(&model, vec![y0])?;
    let lead = Approx1DContext::from_model(&model, y0)?;
    let tau = 1.0;
    println!("{:>5} {:>14} {:>14} {:>14} {:>14}", "y", "exact g", "first term", "far field", "leading order");
    for y in [-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0] {
        println!(
            "{y:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            exact::dryfric_g(tau, y, y0)?,
            exact::dryfric_g_first_term(tau, y, y0)?,
            far.far_field_g(tau, &[y])?,
            lead.g_leading(tau, y)?
        );
    }
    println!("regime indicator at y = 6: {:.3}", far.regime_indicator(lead.theta, &[6.0]));
    Ok(())
}
