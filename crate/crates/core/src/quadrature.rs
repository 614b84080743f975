//! Gauss–Legendre quadrature: fixed rules, composite panels on graded
//! windows, and recursive adaptive bisection.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{FpxError, Result};

/// Order of the panel rule used throughout the crate.
pub const PANEL_ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// The shared 16-point rule.
    pub fn panel_rule() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Flattened nodes and weights of a composite rule on one axis.
#[derive(Debug, Clone, Default)]
pub struct Rule1D {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Rule1D {
    /// Composite 16-point rule over the given panel edges.
    pub fn from_edges(edges: &[f64]) -> Self {
        let gl = GaussLegendre::panel_rule();
        let mut rule = Rule1D {
            x: Vec::with_capacity(edges.len().saturating_sub(1) * PANEL_ORDER),
            w: Vec::with_capacity(edges.len().saturating_sub(1) * PANEL_ORDER),
        };
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&x, &w) in gl.nodes().iter().zip(gl.weights()) {
                rule.x.push(mid + half * x);
                rule.w.push(w * half);
            }
        }
        rule
    }

    pub fn uniform(a: f64, b: f64, panels: usize) -> Self {
        let panels = panels.max(1);
        let edges: Vec<f64> = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        Rule1D::from_edges(&edges)
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// A finite window `center ± half_width` whose panel edges are graded by a
/// sinh map, so panels are fine near the center and coarse in the tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradedWindow {
    pub center: f64,
    pub half_width: f64,
    /// Length scale below which panels are roughly uniform.
    pub scale: f64,
}

impl GradedWindow {
    pub fn new(center: f64, half_width: f64, scale: f64) -> Self {
        GradedWindow {
            center,
            half_width,
            scale,
        }
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    /// Panel edges; `panels` is rounded up to an even count so the center is an edge.
    pub fn edges(&self, panels: usize) -> Vec<f64> {
        let panels = panels.max(2).div_ceil(2) * 2;
        let umax = (self.half_width / self.scale).asinh();
        (0..=panels)
            .map(|i| {
                let u = -umax + 2.0 * umax * i as f64 / panels as f64;
                self.center + self.scale * u.sinh()
            })
            .collect()
    }

    pub fn rule(&self, panels: usize) -> Rule1D {
        Rule1D::from_edges(&self.edges(panels))
    }
}

/// Recursive adaptive Gauss–Legendre integration on `[a, b]`.
///
/// A panel is accepted when the 16-point estimate agrees with the sum of its
/// two halves to `max(abs_tol, rel_tol * |estimate|)`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let gl = GaussLegendre::panel_rule();
    let whole = gl.integrate(&mut f, a, b);
    // Global scale for the relative criterion, refined as we go.
    let scale = whole.abs();
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut total = 0.0;
    let mut last_rejected = (whole, whole);
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl.integrate(&mut f, lo, mid);
        let right = gl.integrate(&mut f, mid, hi);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(FpxError::QuadratureNonConvergence {
                last: vec![refined],
                previous: vec![est],
            });
        }
        let width_frac = ((hi - lo) / (b - a)).abs();
        let tol = abs_tol.max(rel_tol * scale.max(refined.abs())) * width_frac.sqrt();
        if (refined - est).abs() <= tol || depth >= 48 {
            if depth >= 48 && (refined - est).abs() > tol {
                return Err(FpxError::QuadratureNonConvergence {
                    last: vec![refined],
                    previous: vec![last_rejected.0],
                });
            }
            total += refined;
        } else {
            last_rejected = (est, refined);
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(total)
}
