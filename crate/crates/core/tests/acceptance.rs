//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! runtime; exits non-zero when a criterion's outcome differs from the
//! expectation recorded in `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use fpx::approx1d::Approx1DContext;
use fpx::approxnd::ApproxNDContext;
use fpx::exact::{self, OuExact};
use fpx::experiment::{self, ExperimentSpec};
use fpx::extensions::{sqrt_h_leading, FarFieldContext, SQRT_THETA};
use fpx::fisher;
use fpx::metrics::{l1_error, uniform_axis, DensityField};
use fpx::models::{self, DriftModel};
use fpx::quadrature::Rule1D;
use fpx::solver::{restrict, solve_fpe, SolverConfig};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Criteria expected to fail, each with a one-line reason printed next to it.
const KNOWN_FAILURES: [(usize, &str); 1] = [(
    8,
    "fig7 leading-order L1 is 0.17-0.20 at tau=0.25,0.5; fig6 Student relaxes algebraically (L1 2.2e-3 at theta*tau=20)",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

/// Relative error over nodes where the reference is a normal double.
fn rel_err(approx: f64, exact: f64) -> Option<f64> {
    (exact > 1e-280).then(|| ((approx - exact) / exact).abs())
}

// 1. OU exactness in one dimension.
fn c1() -> Outcome {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let (theta, y0) = (1.0, 2.0);
    let model = models::make_ou_1d(theta, 0.0).unwrap();
    let ctx = Approx1DContext::new(&model, theta, y0).unwrap();
    let mut worst: f64 = 0.0;
    for tau in [0.01, 0.1, 1.0, 5.0] {
        let mean = y0 * (-theta * tau).exp();
        let var = -(-2.0 * theta * tau).exp_m1() / theta;
        for y in uniform_axis(-8.0, 8.0, 321) {
            let exact = (-(y - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            if let Some(e) = rel_err(ctx.f_leading(tau, y).unwrap(), exact) {
                worst = worst.max(e);
            }
        }
    }
    let t = start.elapsed();
    outcome(worst < TOL && within(t, 1.0), format!("max rel err {worst:.2e} (tol {TOL:e})"))
}

/// Symmetric OU density from the eigen-decomposition of `a`.
fn ou_nd_oracle(a: &DMatrix<f64>, tau: f64, y: &[f64], y0: &[f64]) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let m = y.len();
    let mut ln = 0.0;
    for k in 0..m {
        let lam = eig.eigenvalues[k];
        let (mut zy, mut zy0) = (0.0, 0.0);
        for i in 0..m {
            zy += v[(i, k)] * y[i];
            zy0 += v[(i, k)] * y0[i];
        }
        let mean = zy0 * (-lam * tau).exp();
        let var = -(-2.0 * lam * tau).exp_m1() / lam;
        ln += -(zy - mean).powi(2) / (2.0 * var) - 0.5 * (2.0 * PI * var).ln();
    }
    ln.exp()
}

// 2. OU exactness in two dimensions.
fn c2() -> Outcome {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let y0 = [1.0, -0.5];
    let axis = uniform_axis(-6.0, 6.0, 101);
    let mut worst: f64 = 0.0;
    for a in [
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 1.0]),
    ] {
        let model = models::make_ou_nd(a.clone(), vec![0.0, 0.0]).unwrap();
        let ctx = ApproxNDContext::new(&model, a.clone(), y0.to_vec()).unwrap();
        for tau in [0.01, 0.1, 1.0, 5.0] {
            for &y1 in &axis {
                for &y2 in &axis {
                    let y = [y1, y2];
                    let exact = ou_nd_oracle(&a, tau, &y, &y0);
                    let lib = exact::ou_density_nd(&a, tau, &y, &y0).unwrap();
                    if let (Some(e), Some(e_lib)) = (
                        rel_err(ctx.f_leading_nd(tau, &y).unwrap(), exact),
                        rel_err(lib, exact),
                    ) {
                        worst = worst.max(e).max(e_lib);
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(worst < TOL && within(t, 5.0), format!("max rel err {worst:.2e} (tol {TOL:e})"))
}

// 3. Closed-form theta values against quadrature.
fn c3() -> Outcome {
    const TOL: f64 = 1e-6;
    let cases = [
        ("sech(1,2)", models::make_sech_power(1.0, 2.0).unwrap(), 4.0 / 3.0),
        ("dryfric", models::make_dry_friction(), 1.0),
        ("student(1/2)", models::make_student_t_1d(0.5).unwrap(), 0.5),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model, expected) in &cases {
        let closed = fisher::resolve_theta(model, None).unwrap().scalar();
        let quad = fisher::estimate_theta(model).unwrap().scalar();
        pass &= (closed - expected).abs() < 1e-14 && (quad - expected).abs() < TOL;
        parts.push(format!("{name}: quad {quad:.9}"));
    }
    outcome(pass, parts.join(", "))
}

// 4. Bivariate double-well theta and K.
fn c4() -> Outcome {
    const TOL: f64 = 1e-3;
    let start = Instant::now();
    let i2 = DMatrix::identity(2, 2);
    let a = models::make_double_well_2d(i2.clone(), [2.0, 0.0], [-2.0, 0.0], [1.0, 1.0], 0.5).unwrap();
    let b = models::make_double_well_2d(i2, [2.0, 2.0], [-2.0, -2.0], [1.0, 0.7], 1.0).unwrap();
    let ta = fisher::estimate_theta(&a).unwrap().theta;
    let tb = fisher::estimate_theta(&b).unwrap().theta;
    let pass = (ta[(0, 0)] - 1.2633).abs() < TOL
        && (ta[(1, 1)] - 1.2774).abs() < TOL
        && ta[(0, 1)].abs() < TOL
        && (a.norm_const() - 2.5352).abs() < TOL
        && (tb[(0, 1)] + 0.1990).abs() < TOL
        && (tb[(0, 0)] - 0.9957).abs() < TOL
        && (b.norm_const() - 4.0767).abs() < TOL;
    let t = start.elapsed();
    outcome(
        pass && within(t, 30.0),
        format!(
            "(a) theta=diag({:.4},{:.4}) K={:.4}; (b) theta12={:.4} K={:.4}",
            ta[(0, 0)],
            ta[(1, 1)],
            a.norm_const(),
            tb[(0, 1)],
            b.norm_const()
        ),
    )
}

// 5. Lyapunov example and equivalence class.
fn c5() -> Outcome {
    let start = Instant::now();
    let c = 1.0;
    let a = DMatrix::from_row_slice(2, 2, &[1.0, c, 0.0, 1.0]);
    let sigma = exact::lyapunov_sigma_inf(&a).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -0.5, 1.0]);
    let sigma_err = (&sigma - &expected).amax();
    let residual = exact::lyapunov_residual(&a, &sigma);
    let k = 1.0 / (1.0 + c * c / 4.0);
    let symmetric = DMatrix::from_row_slice(2, 2, &[k, k * c / 2.0, k * c / 2.0, k * (1.0 + c * c / 2.0)]);
    // A general member of the class, parameterised by b.
    let member = |b: f64| {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                k * (1.0 - c * b / 2.0),
                k * (c / 2.0 - b - c * c * b / 2.0),
                k * (b + c / 2.0),
                k * (1.0 + c * b / 2.0 + c * c / 2.0),
            ],
        )
    };
    let mut pass = sigma_err < 1e-12 && residual < 1e-10;
    for other in [symmetric, member(-0.4), member(0.3)] {
        let r = exact::equivalence_class_check(&a, &other).unwrap();
        pass &= r.equivalent && (r.trace1 - 2.0).abs() < 1e-14 && (r.trace2 - 2.0).abs() < 1e-14;
    }
    let t = start.elapsed();
    outcome(
        pass && within(t, 1.0),
        format!("sigma err {sigma_err:.1e}, residual {residual:.1e}"),
    )
}

// 6. Dry-friction far-field identity.
fn c6() -> Outcome {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let model = models::make_dry_friction();
    let mut rng = StdRng::seed_from_u64(6);
    let (mut worst, mut count): (f64, usize) = (0.0, 0);
    while count < 1000 {
        let tau = rng.random_range(0.05..3.0);
        let y = rng.random_range(-8.0..8.0);
        let y0 = rng.random_range(-8.0..8.0);
        if f64::abs(y) + f64::abs(y0) <= tau {
            continue;
        }
        let far = FarFieldContext::new(&model, vec![y0]).unwrap().far_field_g(tau, &[y]).unwrap();
        let first = exact::dryfric_g_first_term(tau, y, y0).unwrap();
        worst = worst.max(((far - first) / first).abs());
        count += 1;
    }
    let t = start.elapsed();
    outcome(worst < TOL && within(t, 1.0), format!("{count} points, max rel err {worst:.2e}"))
}

// 7. Solver against the exact OU density, mode doubling and RK4 order.
fn c7() -> Outcome {
    let start = Instant::now();
    let (y0, eps) = (2.0, 0.2);
    let ou = models::make_ou_1d(1.0, 0.0).unwrap();
    let ex = OuExact::one_dim(1.0, 0.0).unwrap();
    let cfg = SolverConfig::new_1d(10.0, 256, 1e-3, eps);
    let times = [0.1, 1.0, 5.0];
    let coarse = solve_fpe(&ou, &[y0], &times, &cfg).unwrap();
    let mut worst_l1: f64 = 0.0;
    for f in &coarse {
        let exact = DensityField::from_fn(f.axes.clone(), f.tau, f.meta.clone(), |y| {
            Ok(ex.ln_density_from_gaussian(f.tau, y, &[y0], eps)?.exp())
        })
        .unwrap();
        worst_l1 = worst_l1.max(l1_error(f, &exact).unwrap());
    }
    let fine = solve_fpe(&ou, &[y0], &times, &cfg.with_modes(vec![512])).unwrap();
    let mut doubling: f64 = 0.0;
    for (c, f) in coarse.iter().zip(&fine) {
        doubling = doubling.max(l1_error(c, &restrict(f, 2).unwrap()).unwrap());
    }
    let sech = models::make_sech_power(1.0, 2.0).unwrap();
    let run = |dt: f64| {
        let c = SolverConfig::new_1d(16.0, 256, dt, 0.3);
        solve_fpe(&sech, &[-2.0], &[1.0], &c).unwrap().pop().unwrap()
    };
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let ratio = l1_error(&a, &b).unwrap() / l1_error(&b, &c).unwrap();
    let t = start.elapsed();
    outcome(
        worst_l1 < 1e-6 && doubling < 1e-8 && (14.0..=18.0).contains(&ratio) && within(t, 60.0),
        format!("L1 vs exact {worst_l1:.2e}, doubling {doubling:.2e}, RK4 ratio {ratio:.2}"),
    )
}

/// L1(approx, solver) of the first validated run, per preset and time, with
/// the time `20/theta` appended last. Later runs must reproduce these.
const FROZEN_L1: [(&str, [f64; 6]); 4] = [
    (
        "fig4",
        [
            4.757496679638542e-2,
            7.734478891270408e-2,
            7.865909308163085e-2,
            3.957439322749261e-2,
            3.3187825730183174e-3,
            1.5368881033777778e-7,
        ],
    ),
    (
        "fig6",
        [
            4.182091619008059e-2,
            6.319904876423459e-2,
            7.969809288659009e-2,
            7.130808290680271e-2,
            2.727978009701861e-2,
            2.173535936880544e-3,
        ],
    ),
    (
        "fig7",
        [
            1.702302700809425e-1,
            2.0042783507180967e-1,
            1.481638135863457e-1,
            4.5769215166241564e-2,
            6.260294196938343e-4,
            2.439646937458765e-9,
        ],
    ),
    (
        "fig8",
        [
            1.48450473701762e-1,
            2.3114998400888437e-1,
            3.412122519300999e-1,
            4.582710792328603e-1,
            2.523572434490303e-1,
            2.0905084781815998e-2,
        ],
    ),
];
const FROZEN_REL_TOL: f64 = 1e-6;

// 8. Figure-level agreement between approximation and solver.
fn c8() -> Outcome {
    const PLOTTED_MAX: f64 = 0.15;
    const LATE_MAX: f64 = 1e-3;
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, frozen) in FROZEN_L1 {
        let mut spec = experiment::preset(name).unwrap();
        let theta = fisher::resolve_theta(&build(&spec), None).unwrap().scalar();
        spec.times.push(20.0 / theta);
        let eval = experiment::evaluate(&spec, None).unwrap();
        let series: Vec<f64> = eval.summary.l1_series("approx").into_iter().map(|(_, e)| e).collect();
        let (plotted, late) = series.split_at(series.len() - 1);
        let late = late[0];
        let finite = series.iter().all(|e| e.is_finite());
        let frozen_ok = series
            .iter()
            .zip(frozen)
            .all(|(e, f)| (e - f).abs() <= FROZEN_REL_TOL * f + 1e-12);
        let ok = if name == "fig8" {
            // Starting in a well: intermediate error is allowed, late decay is not.
            let peak = plotted.iter().cloned().fold(0.0, f64::max);
            late < 0.1 * peak && late < plotted[plotted.len() - 1]
        } else {
            plotted.iter().all(|e| *e < PLOTTED_MAX) && late < LATE_MAX
        };
        pass &= finite && frozen_ok && ok;
        let worst = plotted.iter().cloned().fold(0.0, f64::max);
        parts.push(format!(
            "{name}: max {worst:.3} late {late:.1e}{}{}",
            if ok { "" } else { " [bound]" },
            if frozen_ok { "" } else { " [frozen]" }
        ));
    }
    let t = start.elapsed();
    outcome(pass && within(t, 300.0), parts.join("; "))
}

fn build(spec: &ExperimentSpec) -> DriftModel {
    match experiment::build_model(&spec.model, &spec.params).unwrap() {
        experiment::ModelChoice::Drift(m) => m,
        experiment::ModelChoice::SquareRoot { .. } => unreachable!("figure presets use catalog models"),
    }
}

// 9. Reciprocity of the leading-order g on every catalog model.
fn c9() -> Outcome {
    const TOL: f64 = 1e-10;
    let start = Instant::now();
    let i2 = DMatrix::identity(2, 2);
    let catalog: Vec<(&str, DriftModel)> = vec![
        ("ou1d", models::make_ou_1d(1.3, 0.4).unwrap()),
        ("ou2d", models::make_ou_nd(DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 1.0]), vec![0.2, -0.1]).unwrap()),
        ("sech", models::make_sech_power(1.0, 2.0).unwrap()),
        ("dryfric", models::make_dry_friction()),
        ("student1d", models::make_student_t_1d(0.5).unwrap()),
        ("dwell1d", models::make_double_well_1d([2.0, -2.0], [1.0, 1.0], 0.5f64.sqrt()).unwrap()),
        ("student2d", models::make_student_t_2d(1.0, 3.0, 10.0).unwrap()),
        ("dwell2d-a", models::make_double_well_2d(i2.clone(), [2.0, 0.0], [-2.0, 0.0], [1.0, 1.0], 0.5).unwrap()),
        ("dwell2d-b", models::make_double_well_2d(i2, [2.0, 2.0], [-2.0, -2.0], [1.0, 0.7], 1.0).unwrap()),
    ];
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut worst_model = "none";
    for (name, model) in &catalog {
        let theta = fisher::resolve_theta(model, None).unwrap().theta;
        let g = |tau: f64, y: &[f64], y0: &[f64]| -> f64 {
            if model.dim() == 1 {
                Approx1DContext::new(model, theta[(0, 0)], y0[0]).unwrap().g_leading(tau, y[0]).unwrap()
            } else {
                ApproxNDContext::new(model, theta.clone(), y0.to_vec()).unwrap().g_leading_nd(tau, y).unwrap()
            }
        };
        for _ in 0..100 {
            let tau = rng.random_range(0.05..3.0);
            let y: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y0: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (fwd, bwd) = (g(tau, &y, &y0), g(tau, &y0, &y));
            let d = (fwd - bwd).abs() / fwd.abs().max(bwd.abs()).max(1e-300);
            if d > worst {
                worst = d;
                worst_model = name;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst < TOL && within(t, 5.0),
        format!("{} models x 100 pairs, max defect {worst:.2e} ({worst_model})", catalog.len()),
    )
}

// 10. Square-root process normalization and short-time h.
fn c10() -> Outcome {
    let start = Instant::now();
    let mut mass_err: f64 = 0.0;
    for nu in [1.5, 3.0] {
        for tau in [0.05, 1.0, 4.0] {
            // y = t^2 removes the y^{nu-1} behaviour at the origin.
            let total = Rule1D::uniform(0.0, 10.0, 400).integrate(|t| {
                if t <= 0.0 {
                    0.0
                } else {
                    2.0 * t * exact::sqrt_process_density(nu, tau, t * t, 1.2).unwrap()
                }
            });
            mass_err = mass_err.max((total - 1.0).abs());
        }
    }
    let (nu, y0, tau) = (1.5, 1.0, 1e-3);
    let ln_g = |y: f64| exact::sqrt_process_ln_density(nu, tau, y, y0).unwrap() - exact::sqrt_process_ln_f_inf(nu, y);
    let (mut h_err, mut h_scale): (f64, f64) = (0.0, 0.0);
    for k in -5..=5 {
        let y = y0 * (1.0 + 0.08 * k as f64);
        let step = 1e-6;
        let exact_h = -(ln_g(y + step) - ln_g(y - step)) / (2.0 * step);
        let approx = sqrt_h_leading(SQRT_THETA, nu, y0, tau, y).unwrap();
        h_err = h_err.max((approx - exact_h).abs());
        h_scale = h_scale.max(exact_h.abs());
    }
    let t = start.elapsed();
    outcome(
        mass_err < 1e-7 && h_err < 1e-2 && within(t, 5.0),
        format!("mass err {mass_err:.1e}, h err {h_err:.1e} (|h| up to {h_scale:.0})"),
    )
}

// 11. Determinism of the fig4 preset output.
fn c11() -> Outcome {
    let spec = experiment::preset("fig4").unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (_, s1) = experiment::run_experiment(&spec, Some(d1.path()), Some(1)).unwrap();
    experiment::run_experiment(&spec, Some(d2.path()), Some(2)).unwrap();
    let mut identical = 0;
    for r in &s1.results {
        let a = fs::read(d1.path().join(&r.file)).unwrap();
        let b = fs::read(d2.path().join(&r.file)).unwrap();
        if a == b {
            identical += 1;
        }
    }
    outcome(
        identical == s1.results.len(),
        format!("{identical}/{} CSV files byte-identical", s1.results.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("OU exactness 1D", c1),
        ("OU exactness 2D", c2),
        ("theta closed forms", c3),
        ("double-well theta and K", c4),
        ("Lyapunov example", c5),
        ("dry-friction far field", c6),
        ("solver validation", c7),
        ("figure-level agreement", c8),
        ("reciprocity", c9),
        ("square-root process", c10),
        ("determinism", c11),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == n);
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {status} [{secs:7.2}s] {name}: {}", o.detail);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("             known failure: {why}"),
            (true, Some(_)) => {
                println!("             listed as a known failure but passed");
                unexpected += 1;
            }
            (false, None) => unexpected += 1,
            (true, None) => {}
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criterion outcome(s) differ from expectation");
        std::process::exit(1);
    }
}
