//! Runs a figure preset (default `fig4`) and writes its CSV tables and JSON
//! summary, as `fpx preset` does.
//!
//! ```text
//! cargo run --release --example run_preset -- fig7 runs/fig7
//! ```

use std::path::PathBuf;

use fpx::experiment;

fn main() -> fpx::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fig4".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(format!("fpx-{name}")));
    let spec = experiment::preset(&name)?;
    print!("{}", spec.to_toml());
    let (dir, summary) = experiment::run_experiment(&spec, Some(&out), None)?;
    for r in &summary.results {
        println!("{:<12} tau = {:<5} mass = {:?} L1 = {:?}", r.method, r.tau, r.mass, r.l1_vs_reference);
    }
    println!("wrote {}", dir.display());
    Ok(())
}
