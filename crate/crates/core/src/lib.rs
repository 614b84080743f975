//! Closed-form leading-order approximations to the transition density of
//! mean-reverting Fokker–Planck equations, with exact reference densities
//! and a Fourier spectral solver to check them against.
//!
//! Everything works in normalized coordinates, where the forward equation is
//! `f_tau = -div(A f) + lap f` and `A = grad ln f_inf` for conservative drifts.
//!
//! The runnable examples are the best tour of the crate:
//!
//! ```text
//! cargo run --release --example ou_exactness
//! cargo run --release --example fisher_theta
//! cargo run --release --example sech_vs_solver
//! cargo run --release --example bivariate_student
//! cargo run --release --example double_well_2d
//! cargo run --release --example dry_friction_far_field
//! cargo run --release --example square_root_process
//! cargo run --release --example nonconservative_ou
//! cargo run --release --example solver_convergence
//! cargo run --release --example run_preset
//! ```

pub mod approx1d;
pub mod approxnd;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod extensions;
pub mod fisher;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod quadrature;
pub mod solver;
pub mod special;

pub use error::{FpxError, Result};
pub use models::DriftModel;
