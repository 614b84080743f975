//! Density fields on uniform tensor grids and the error measures between them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FpxError, Result};

/// Model, start point and method that produced a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldMeta {
    pub model: String,
    pub y0: Vec<f64>,
    pub method: String,
}

/// Density values on a uniform tensor grid at one time. Values are stored
/// row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub tau: f64,
    pub meta: FieldMeta,
}

/// `n` equally spaced nodes from `lo` to `hi` inclusive.
pub fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "an axis needs at least two nodes");
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

impl DensityField {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>, tau: f64, meta: FieldMeta) -> Result<Self> {
        let n: usize = axes.iter().map(Vec::len).product();
        if n != values.len() {
            return Err(FpxError::GridMismatch(format!(
                "{} values for a grid of {n} nodes",
                values.len()
            )));
        }
        Ok(DensityField {
            axes,
            values,
            tau,
            meta,
        })
    }

    /// Evaluates `f` at every node in parallel. The first error wins.
    pub fn from_fn<F>(axes: Vec<Vec<f64>>, tau: f64, meta: FieldMeta, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let n: usize = shape.iter().product();
        let values = (0..n)
            .into_par_iter()
            .map(|flat| {
                let y = node(&axes, &shape, flat);
                f(&y)
            })
            .collect::<Result<Vec<f64>>>()?;
        DensityField::new(axes, values, tau, meta)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        node(&self.axes, &self.shape(), flat)
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.axes, &self.values)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Copy with `values` replaced, keeping the grid.
    pub fn with_values(&self, values: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        DensityField::new(self.axes.clone(), values, self.tau, meta)
    }

    pub fn same_grid(&self, other: &DensityField) -> bool {
        self.axes.len() == other.axes.len()
            && self.axes.iter().zip(&other.axes).all(|(a, b)| {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
            })
    }
}

fn node(axes: &[Vec<f64>], shape: &[usize], mut flat: usize) -> Vec<f64> {
    let mut y = vec![0.0; axes.len()];
    for d in (0..axes.len()).rev() {
        y[d] = axes[d][flat % shape[d]];
        flat /= shape[d];
    }
    y
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (axis[i + 1] - axis[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Tensor trapezoid rule.
pub fn trapezoid(axes: &[Vec<f64>], values: &[f64]) -> f64 {
    match axes.len() {
        1 => {
            let w = trapezoid_weights(&axes[0]);
            w.iter().zip(values).map(|(w, v)| w * v).sum()
        }
        2 => {
            let w0 = trapezoid_weights(&axes[0]);
            let w1 = trapezoid_weights(&axes[1]);
            let n1 = w1.len();
            w0.par_iter()
                .enumerate()
                .map(|(i, a)| {
                    let row = &values[i * n1..(i + 1) * n1];
                    a * w1.iter().zip(row).map(|(b, v)| b * v).sum::<f64>()
                })
                .sum()
        }
        _ => unimplemented!("fields have one or two dimensions"),
    }
}

fn require_same_grid(a: &DensityField, b: &DensityField) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(FpxError::GridMismatch(format!(
            "{}/{} vs {}/{} grids differ",
            a.meta.model, a.meta.method, b.meta.model, b.meta.method
        )))
    }
}

/// `int |f1 - f2|` by the tensor trapezoid rule.
pub fn l1_error(f1: &DensityField, f2: &DensityField) -> Result<f64> {
    require_same_grid(f1, f2)?;
    let diff: Vec<f64> = f1.values.iter().zip(&f2.values).map(|(a, b)| (a - b).abs()).collect();
    Ok(trapezoid(&f1.axes, &diff))
}

pub fn linf_error(f1: &DensityField, f2: &DensityField) -> Result<f64> {
    require_same_grid(f1, f2)?;
    Ok(f1
        .values
        .iter()
        .zip(&f2.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

pub fn mass(f: &DensityField) -> f64 {
    f.mass()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub l1: f64,
    pub linf: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub reciprocity_defect: Option<f64>,
    pub grid: String,
    pub tau: f64,
}

/// Grid label such as `401` or `256x256`.
pub fn grid_id(f: &DensityField) -> String {
    f.shape().iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

pub fn compare(f1: &DensityField, f2: &DensityField) -> Result<ErrorReport> {
    Ok(ErrorReport {
        l1: l1_error(f1, f2)?,
        linf: linf_error(f1, f2)?,
        mass1: f1.mass(),
        mass2: f2.mass(),
        reciprocity_defect: None,
        grid: grid_id(f1),
        tau: f1.tau,
    })
}

/// `max |g(tau, y|y0) - g(tau, y0|y)| / max(g, 1e-30)` over the pairs.
pub fn reciprocity_defect<G>(g: G, tau: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64>
where
    G: Fn(f64, &[f64], &[f64]) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    for (y, y0) in pairs {
        let forward = g(tau, y, y0)?;
        let backward = g(tau, y0, y)?;
        let scale = forward.abs().max(backward.abs()).max(1e-30);
        worst = worst.max((forward - backward).abs() / scale);
    }
    Ok(worst)
}
