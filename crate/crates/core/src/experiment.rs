//! Experiment specs, figure presets and the runner behind the `fpx` binary.
//!
//! A spec names a model and its parameters, a start point, evaluation times
//! and the methods to compare. Every method is evaluated on one shared grid
//! (the solver's grid when the solver takes part), each (method, time) pair
//! is written as a CSV table and a JSON summary collects masses, L1 errors
//! against the reference method, reciprocity defects and timings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx1d::Approx1DContext;
use crate::approxnd::{rho, ApproxNDContext, MatrixKernel};
use crate::error::{FpxError, Result};
use crate::exact::{self, NonConservativeOu, OuExact};
use crate::extensions::{self, FarFieldContext, SQRT_THETA};
use crate::fisher::{self, ThetaEstimate, ThetaSource};
use crate::metrics::{self, uniform_axis, DensityField, FieldMeta};
use crate::models::{self, DriftModel, ModelKind};
use crate::solver::{self, ConvergenceReport, SolverConfig};

/// Theta override: a scalar for 1D models or a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub half_width: Vec<f64>,
    pub modes: Vec<usize>,
    pub dt: f64,
    pub ic_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_cells: Option<f64>,
}

impl SolverSpec {
    pub fn to_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            half_width: self.half_width.clone(),
            modes: self.modes.clone(),
            dt: self.dt,
            ic_width: self.ic_width,
            ..SolverConfig::new_1d(1.0, 64, 1.0, 1.0)
        };
        if let Some(v) = self.conv_tol {
            cfg.conv_tol = v;
        }
        if let Some(v) = self.edge_ratio {
            cfg.edge_ratio = v;
        }
        if let Some(v) = self.smoothing_cells {
            cfg.smoothing_cells = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: String,
    #[serde(default)]
    pub params: toml::Table,
    pub y0: Vec<f64>,
    pub times: Vec<f64>,
    pub methods: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Approx,
    ApproxB1H,
    Exact,
    Solver,
    FarField,
    SqrtApprox,
    NonCons,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Approx,
        Method::ApproxB1H,
        Method::Exact,
        Method::Solver,
        Method::FarField,
        Method::SqrtApprox,
        Method::NonCons,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Approx => "approx",
            Method::ApproxB1H => "approx-b1-h",
            Method::Exact => "exact",
            Method::Solver => "solver",
            Method::FarField => "farfield",
            Method::SqrtApprox => "sqrt-approx",
            Method::NonCons => "noncons",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.tag() == s)
    }

    /// Methods whose tables hold a density (the rest hold `h`).
    pub fn is_density(self) -> bool {
        matches!(
            self,
            Method::Approx | Method::Exact | Method::Solver | Method::FarField
        )
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "spec".into());
            FpxError::config(path, e.message().to_string())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| FpxError::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs serialize")
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        if self.methods.is_empty() {
            return Err(FpxError::config("methods", "at least one method is required"));
        }
        let mut out = Vec::new();
        for (i, m) in self.methods.iter().enumerate() {
            let method = Method::parse(m).ok_or_else(|| {
                FpxError::config(
                    format!("methods[{i}]"),
                    format!(
                        "unknown method `{m}`; expected one of {}",
                        Method::ALL.map(Method::tag).join(", ")
                    ),
                )
            })?;
            if out.contains(&method) {
                return Err(FpxError::config(format!("methods[{i}]"), format!("`{m}` is repeated")));
            }
            out.push(method);
        }
        Ok(out)
    }

    /// The method every other density is compared against.
    pub fn reference_method(&self, methods: &[Method]) -> Result<Option<Method>> {
        if let Some(r) = &self.reference {
            let m = Method::parse(r)
                .ok_or_else(|| FpxError::config("reference", format!("unknown method `{r}`")))?;
            if !methods.contains(&m) {
                return Err(FpxError::config("reference", format!("`{r}` is not among the methods")));
            }
            if !m.is_density() {
                return Err(FpxError::config("reference", format!("`{r}` does not produce a density")));
            }
            return Ok(Some(m));
        }
        Ok([Method::Exact, Method::Solver]
            .into_iter()
            .find(|m| methods.contains(m)))
    }

    fn validate_times(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(FpxError::config("times", "at least one time is required"));
        }
        for (i, t) in self.times.iter().enumerate() {
            if !(*t > 0.0) || !t.is_finite() {
                return Err(FpxError::config(format!("times[{i}]"), "times must be positive"));
            }
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FpxError::config("times", "times must be strictly increasing"));
        }
        Ok(())
    }
}

fn param_f64(params: &toml::Table, key: &str) -> Result<f64> {
    match params.get(key) {
        Some(toml::Value::Float(v)) => Ok(*v),
        Some(toml::Value::Integer(v)) => Ok(*v as f64),
        Some(_) => Err(FpxError::config(format!("params.{key}"), "expected a number")),
        None => Err(FpxError::config(format!("params.{key}"), "missing")),
    }
}

fn param_vec(params: &toml::Table, key: &str) -> Result<Vec<f64>> {
    let path = format!("params.{key}");
    match params.get(key) {
        Some(toml::Value::Array(a)) => a
            .iter()
            .map(|v| match v {
                toml::Value::Float(x) => Ok(*x),
                toml::Value::Integer(x) => Ok(*x as f64),
                _ => Err(FpxError::config(path.clone(), "expected numbers")),
            })
            .collect(),
        Some(_) => Err(FpxError::config(path, "expected an array")),
        None => Err(FpxError::config(path, "missing")),
    }
}

fn param_pair(params: &toml::Table, key: &str) -> Result<[f64; 2]> {
    let v = param_vec(params, key)?;
    v.try_into()
        .map_err(|_| FpxError::config(format!("params.{key}"), "expected two numbers"))
}

fn param_matrix(params: &toml::Table, key: &str) -> Result<DMatrix<f64>> {
    let path = format!("params.{key}");
    let rows = match params.get(key) {
        Some(toml::Value::Array(rows)) => rows,
        Some(_) => return Err(FpxError::config(path, "expected an array of rows")),
        None => return Err(FpxError::config(path, "missing")),
    };
    let mut table = toml::Table::new();
    let mut data = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        table.insert("row".into(), row.clone());
        let r = param_vec(&table, "row").map_err(|_| FpxError::config(format!("{path}[{i}]"), "expected numbers"))?;
        data.push(r);
    }
    matrix_from_rows(&data).map_err(|reason| FpxError::config(path, reason))
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err("expected a square matrix".into());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_keys(params: &toml::Table, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(FpxError::config(
                format!("params.{k}"),
                format!("unknown parameter; expected one of {}", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

/// A catalog model, or the square-root process, which lives on the half-line.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Drift(DriftModel),
    SquareRoot { nu: f64 },
}

/// Builds a model from its id and parameter table.
pub fn build_model(id: &str, params: &toml::Table) -> Result<ModelChoice> {
    let m = match id {
        "ou" => {
            if params.contains_key("a") {
                check_keys(params, &["a", "mean"])?;
                let a = param_matrix(params, "a")?;
                let mean = if params.contains_key("mean") {
                    param_vec(params, "mean")?
                } else {
                    vec![0.0; a.nrows()]
                };
                models::make_ou_nd(a, mean)?
            } else {
                check_keys(params, &["theta", "y_inf"])?;
                let y_inf = if params.contains_key("y_inf") { param_f64(params, "y_inf")? } else { 0.0 };
                models::make_ou_1d(param_f64(params, "theta")?, y_inf)?
            }
        }
        "sech" => {
            check_keys(params, &["gamma_hat", "delta_hat"])?;
            models::make_sech_power(param_f64(params, "gamma_hat")?, param_f64(params, "delta_hat")?)?
        }
        "dryfric" => {
            check_keys(params, &[])?;
            models::make_dry_friction()
        }
        "student1d" => {
            check_keys(params, &["gamma_hat"])?;
            models::make_student_t_1d(param_f64(params, "gamma_hat")?)?
        }
        "dwell1d" => {
            check_keys(params, &["alpha", "beta", "gamma"])?;
            models::make_double_well_1d(
                param_pair(params, "alpha")?,
                param_pair(params, "beta")?,
                param_f64(params, "gamma")?,
            )?
        }
        "student2d" => {
            check_keys(params, &["a1", "a2", "nu"])?;
            models::make_student_t_2d(param_f64(params, "a1")?, param_f64(params, "a2")?, param_f64(params, "nu")?)?
        }
        "dwell2d" => {
            check_keys(params, &["a", "alpha1", "alpha2", "beta", "gamma"])?;
            let a = if params.contains_key("a") {
                param_matrix(params, "a")?
            } else {
                DMatrix::identity(2, 2)
            };
            models::make_double_well_2d(
                a,
                param_pair(params, "alpha1")?,
                param_pair(params, "alpha2")?,
                param_pair(params, "beta")?,
                param_f64(params, "gamma")?,
            )?
        }
        "sqrt" => {
            check_keys(params, &["nu"])?;
            let nu = param_f64(params, "nu")?;
            if !(nu > 0.0) {
                return Err(FpxError::config("params.nu", "must be positive"));
            }
            return Ok(ModelChoice::SquareRoot { nu });
        }
        other => {
            return Err(FpxError::config(
                "model",
                format!(
                    "unknown model `{other}`; expected ou, sech, dryfric, student1d, dwell1d, student2d, dwell2d or sqrt"
                ),
            ))
        }
    };
    Ok(ModelChoice::Drift(m))
}

fn theta_override(spec: &ExperimentSpec) -> Result<Option<DMatrix<f64>>> {
    Ok(match &spec.theta {
        None => None,
        Some(ThetaSpec::Scalar(t)) => Some(DMatrix::from_element(1, 1, *t)),
        Some(ThetaSpec::Matrix(rows)) => {
            Some(matrix_from_rows(rows).map_err(|reason| FpxError::config("theta", reason))?)
        }
    })
}

/// One output table: a density (column `f`) or `h` components.
#[derive(Debug, Clone)]
pub struct Table {
    pub method: Method,
    pub tau: f64,
    pub axes: Vec<Vec<f64>>,
    pub names: Vec<String>,
    /// One vector per node.
    pub rows: Vec<Vec<f64>>,
    pub field: Option<DensityField>,
}

impl Table {
    fn from_field(method: Method, field: DensityField) -> Self {
        Table {
            method,
            tau: field.tau,
            axes: field.axes.clone(),
            names: vec!["f".into()],
            rows: field.values.iter().map(|v| vec![*v]).collect(),
            field: Some(field),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-tau{}.csv", self.method.tag(), self.tau)
    }
}

/// Formats a table as CSV: a `#` header, column names, then one row per node
/// with 17 significant digits. Negative spectral undershoot is clipped to zero.
pub fn format_csv(model: &str, y0: &[f64], table: &Table) -> String {
    let mut s = String::new();
    let y0s = y0.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ");
    writeln!(s, "# model={model}, method={}, tau={}, y0={y0s}", table.method.tag(), table.tau).unwrap();
    let mut cols: Vec<String> = (1..=table.axes.len()).map(|i| format!("y{i}")).collect();
    cols.extend(table.names.iter().cloned());
    writeln!(s, "{}", cols.join(",")).unwrap();
    let shape: Vec<usize> = table.axes.iter().map(Vec::len).collect();
    for (flat, row) in table.rows.iter().enumerate() {
        let mut rest = flat;
        let mut coords = vec![0.0; shape.len()];
        for d in (0..shape.len()).rev() {
            coords[d] = table.axes[d][rest % shape[d]];
            rest /= shape[d];
        }
        let mut line = coords.iter().map(|c| format!("{c:.16e}")).collect::<Vec<_>>();
        for v in row {
            let v = if table.method.is_density() && *v < 0.0 { 0.0 } else { *v };
            line.push(format!("{v:.16e}"));
        }
        writeln!(s, "{}", line.join(",")).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub tau: f64,
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_vs_reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linf_vs_reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reciprocity_defect: Option<f64>,
}

/// Pointwise check of an `h`-level method against a reference `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HCheck {
    pub method: String,
    pub tau: f64,
    pub against: String,
    /// Mean absolute difference over the nodes compared.
    pub mean_abs_error: f64,
    /// The same measure for the plain leading-order `h`, when meaningful.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leading_order_mean_abs_error: Option<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub model: String,
    pub dim: usize,
    pub y0: Vec<f64>,
    pub times: Vec<f64>,
    pub methods: Vec<String>,
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    pub results: Vec<MethodResult>,
    pub h_checks: Vec<HCheck>,
    /// Wall-clock seconds per method.
    pub timings: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
}

impl RunSummary {
    /// L1 error of `method` against the reference at each time.
    pub fn l1_series(&self, method: &str) -> Vec<(f64, f64)> {
        self.results
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.l1_vs_reference.map(|e| (r.tau, e)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub tables: Vec<Table>,
    pub summary: RunSummary,
}

fn meta(model: &str, y0: &[f64], method: Method) -> FieldMeta {
    FieldMeta {
        model: model.into(),
        y0: y0.to_vec(),
        method: method.tag().into(),
    }
}

fn default_grid(choice: &ModelChoice, dim: usize) -> GridSpec {
    match choice {
        ModelChoice::SquareRoot { .. } => GridSpec {
            lo: vec![0.05],
            hi: vec![10.0],
            n: vec![400],
        },
        ModelChoice::Drift(_) => GridSpec {
            lo: vec![-8.0; dim],
            hi: vec![8.0; dim],
            n: vec![if dim == 1 { 321 } else { 161 }; dim],
        },
    }
}

fn grid_axes(grid: &GridSpec, dim: usize) -> Result<Vec<Vec<f64>>> {
    if grid.lo.len() != dim || grid.hi.len() != dim || grid.n.len() != dim {
        return Err(FpxError::config("grid", format!("expected {dim} entries in lo, hi and n")));
    }
    (0..dim)
        .map(|a| {
            if grid.n[a] < 2 || !(grid.hi[a] > grid.lo[a]) {
                return Err(FpxError::config("grid", format!("axis {a} needs hi > lo and n >= 2")));
            }
            Ok(uniform_axis(grid.lo[a], grid.hi[a], grid.n[a]))
        })
        .collect()
}

enum ApproxCtx<'a> {
    One(Approx1DContext<'a>),
    Many(ApproxNDContext<'a>),
}

impl ApproxCtx<'_> {
    fn ln_g(&self, tau: f64, y: &[f64]) -> Result<f64> {
        match self {
            ApproxCtx::One(c) => c.ln_g_leading(tau, y[0]),
            ApproxCtx::Many(c) => c.ln_g_leading_nd(tau, y),
        }
    }
}

fn approx_ctx<'a>(model: &'a DriftModel, theta: &DMatrix<f64>, y0: &[f64]) -> Result<ApproxCtx<'a>> {
    if model.dim() == 1 {
        Ok(ApproxCtx::One(Approx1DContext::new(model, theta[(0, 0)], y0[0])?))
    } else {
        Ok(ApproxCtx::Many(ApproxNDContext::new(model, theta.clone(), y0.to_vec())?))
    }
}

fn approx_field(model: &DriftModel, theta: &DMatrix<f64>, y0: &[f64], tau: f64, axes: &[Vec<f64>]) -> Result<DensityField> {
    let m = meta(model.id(), y0, Method::Approx);
    match approx_ctx(model, theta, y0)? {
        ApproxCtx::One(c) => DensityField::from_fn(axes.to_vec(), tau, m, |y| c.f_leading(tau, y[0])),
        ApproxCtx::Many(c) => {
            let start = c.ln_omega(tau, y0)?;
            DensityField::from_fn(axes.to_vec(), tau, m, |y| {
                Ok(c.ln_f_leading_nd_with_start(tau, y, start)?.exp())
            })
        }
    }
}

/// Deterministic sample of node pairs for reciprocity checks.
fn sample_pairs(axes: &[Vec<f64>], count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let node = |mut flat: usize| {
        let mut y = vec![0.0; shape.len()];
        for d in (0..shape.len()).rev() {
            y[d] = axes[d][flat % shape[d]];
            flat /= shape[d];
        }
        y
    };
    (0..count)
        .map(|k| {
            let a = (total / 5 + k * 7919) % total;
            let b = (total / 3 + k * 104_729) % total;
            (node(a), node(b))
        })
        .collect()
}

fn exact_field(model: &DriftModel, y0: &[f64], tau: f64, axes: &[Vec<f64>]) -> Result<DensityField> {
    let m = meta(model.id(), y0, Method::Exact);
    match model.kind() {
        ModelKind::Ou { generator, mean, .. } => {
            if model.conservative() {
                let ex = OuExact::new(generator.clone(), mean.clone())?;
                DensityField::from_fn(axes.to_vec(), tau, m, |y| ex.density(tau, y, y0))
            } else {
                if mean.iter().any(|v| *v != 0.0) {
                    return Err(FpxError::config("params.mean", "the non-conservative exact density needs a zero mean"));
                }
                let ex = NonConservativeOu::new(generator.clone())?;
                DensityField::from_fn(axes.to_vec(), tau, m, |y| ex.density(tau, y, y0))
            }
        }
        ModelKind::DryFriction => {
            DensityField::from_fn(axes.to_vec(), tau, m, |y| exact::dryfric_density(tau, y[0], y0[0]))
        }
        _ => Err(FpxError::config(
            "methods",
            format!("model `{}` has no exact density", model.id()),
        )),
    }
}

/// `-d/dy ln(f/f_inf)` by central differences on a 1D field, restricted to
/// nodes where the field exceeds `1e-6` of its peak.
fn field_h(field: &DensityField, model: &DriftModel) -> Vec<Option<f64>> {
    let x = &field.axes[0];
    let f = &field.values;
    let peak = field.max_value();
    (0..x.len())
        .map(|i| {
            if i == 0 || i + 1 == x.len() {
                return None;
            }
            if f[i - 1] <= 1e-6 * peak || f[i + 1] <= 1e-6 * peak {
                return None;
            }
            let lg = |j: usize| f[j].ln() - model.ln_f_inf(&[x[j]]);
            Some(-(lg(i + 1) - lg(i - 1)) / (x[i + 1] - x[i - 1]))
        })
        .collect()
}

/// Evaluates every (method, time) pair without touching the file system.
pub fn evaluate(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Evaluation> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| FpxError::config("threads", e.to_string()))?;
    pool.install(|| evaluate_inner(spec))
}

fn evaluate_inner(spec: &ExperimentSpec) -> Result<Evaluation> {
    let methods = spec.parsed_methods()?;
    spec.validate_times()?;
    let reference = spec.reference_method(&methods)?;
    let choice = build_model(&spec.model, &spec.params)?;
    match choice {
        ModelChoice::SquareRoot { nu } => evaluate_sqrt(spec, nu, &methods, reference),
        ModelChoice::Drift(ref model) => evaluate_drift(spec, &choice, model, &methods, reference),
    }
}

fn evaluate_drift(
    spec: &ExperimentSpec,
    choice: &ModelChoice,
    model: &DriftModel,
    methods: &[Method],
    reference: Option<Method>,
) -> Result<Evaluation> {
    let dim = model.dim();
    if spec.y0.len() != dim {
        return Err(FpxError::config(
            "y0",
            format!("model `{}` has dimension {dim}, y0 has {}", model.id(), spec.y0.len()),
        ));
    }
    for m in methods {
        if *m == Method::SqrtApprox {
            return Err(FpxError::config("methods", "sqrt-approx needs model = \"sqrt\""));
        }
        if *m == Method::NonCons && model.conservative() {
            return Err(FpxError::config("methods", "noncons needs a non-symmetric OU generator"));
        }
        if (*m == Method::ApproxB1H) && dim != 1 {
            return Err(FpxError::config("methods", "approx-b1-h is one-dimensional"));
        }
    }

    let solver_cfg = match (&spec.solver, methods.contains(&Method::Solver)) {
        (Some(s), _) => Some(s.to_config()),
        (None, true) => return Err(FpxError::config("solver", "the solver method needs a [solver] table")),
        (None, false) => None,
    };
    let axes = match (&solver_cfg, methods.contains(&Method::Solver)) {
        (Some(cfg), true) => {
            cfg.validate()?;
            (0..dim).map(|a| cfg.axis(a)).collect()
        }
        _ => grid_axes(spec.grid.as_ref().unwrap_or(&default_grid(choice, dim)), dim)?,
    };

    let needs_theta = methods
        .iter()
        .any(|m| matches!(m, Method::Approx | Method::ApproxB1H));
    let theta: Option<ThetaEstimate> = if needs_theta {
        Some(fisher::resolve_theta(model, theta_override(spec)?)?)
    } else {
        None
    };
    let y0 = spec.y0.clone();

    // Solver first (sequential in time), other (method, time) pairs in parallel.
    let mut timings = BTreeMap::new();
    let mut tables: Vec<Table> = Vec::new();
    let pairs: Vec<(Method, usize)> = methods
        .iter()
        .filter(|m| **m != Method::Solver)
        .flat_map(|m| (0..spec.times.len()).map(move |i| (*m, i)))
        .collect();
    let solver_task = || -> Result<(Vec<Table>, f64)> {
        let start = Instant::now();
        let cfg = solver_cfg.as_ref().expect("solver config present");
        let fields = solver::solve_fpe(model, &y0, &spec.times, cfg)?;
        Ok((
            fields.into_iter().map(|f| Table::from_field(Method::Solver, f)).collect(),
            start.elapsed().as_secs_f64(),
        ))
    };
    let point_task = |&(method, i): &(Method, usize)| -> Result<(Table, f64)> {
        let start = Instant::now();
        let tau = spec.times[i];
        let table = match method {
            Method::Approx => {
                let th = &theta.as_ref().expect("theta resolved").theta;
                Table::from_field(method, approx_field(model, th, &y0, tau, &axes)?)
            }
            Method::Exact => Table::from_field(method, exact_field(model, &y0, tau, &axes)?),
            Method::FarField => {
                let ctx = FarFieldContext::new(model, y0.clone())?;
                let f = DensityField::from_fn(axes.clone(), tau, meta(model.id(), &y0, method), |y| {
                    ctx.far_field_f(tau, y)
                })?;
                Table::from_field(method, f)
            }
            Method::ApproxB1H => {
                let th = theta.as_ref().expect("theta resolved").scalar();
                let ctx = Approx1DContext::new(model, th, y0[0])?;
                let rows = axes[0]
                    .par_iter()
                    .map(|&y| Ok(vec![ctx.h_leading(tau, y)?, ctx.h_with_b1(tau, y)?]))
                    .collect::<Result<Vec<_>>>()?;
                Table {
                    method,
                    tau,
                    axes: axes.clone(),
                    names: vec!["h_leading".into(), "h_b1".into()],
                    rows,
                    field: None,
                }
            }
            Method::NonCons => {
                let a = match model.kind() {
                    ModelKind::Ou { generator, .. } => generator.clone(),
                    _ => unreachable!("checked above"),
                };
                let sigma = exact::lyapunov_sigma_inf(&a)?;
                let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
                let total: usize = shape.iter().product();
                let rows = (0..total)
                    .into_par_iter()
                    .map(|flat| {
                        let y = DensityField::new(axes.clone(), vec![0.0; total], tau, meta("", &[], method))
                            .map(|f| f.node(flat))?;
                        extensions::nonconservative_h(&a, &sigma, tau, &y, &y0)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Table {
                    method,
                    tau,
                    axes: axes.clone(),
                    names: (1..=dim).map(|i| format!("h{i}")).collect(),
                    rows,
                    field: None,
                }
            }
            Method::Solver | Method::SqrtApprox => unreachable!("handled elsewhere"),
        };
        Ok((table, start.elapsed().as_secs_f64()))
    };

    let (solver_out, point_out) = rayon::join(
        || {
            if methods.contains(&Method::Solver) {
                Some(solver_task())
            } else {
                None
            }
        },
        || pairs.par_iter().map(point_task).collect::<Vec<_>>(),
    );

    // Assemble in spec order: each method, then each time.
    let mut point_iter = point_out.into_iter();
    let mut solver_out = solver_out;
    for m in methods {
        if *m == Method::Solver {
            let (t, secs) = solver_out.take().expect("solver ran")?;
            tables.extend(t);
            timings.insert(m.tag().to_string(), secs);
        } else {
            let mut total = 0.0;
            for _ in 0..spec.times.len() {
                let (t, secs) = point_iter.next().expect("one result per pair")?;
                total += secs;
                tables.push(t);
            }
            timings.insert(m.tag().to_string(), total);
        }
    }

    // Reference comparisons.
    let mut results = Vec::new();
    for t in &tables {
        let mut r = MethodResult {
            method: t.method.tag().into(),
            tau: t.tau,
            file: t.file_name(),
            mass: t.field.as_ref().map(|f| f.mass()),
            l1_vs_reference: None,
            linf_vs_reference: None,
            reciprocity_defect: None,
        };
        if let (Some(reference), Some(field)) = (reference, &t.field) {
            if reference != t.method {
                let rf = tables
                    .iter()
                    .find(|x| x.method == reference && x.tau == t.tau)
                    .and_then(|x| x.field.as_ref())
                    .expect("reference evaluated at every time");
                r.l1_vs_reference = Some(metrics::l1_error(field, rf)?);
                r.linf_vs_reference = Some(metrics::linf_error(field, rf)?);
            }
        }
        if t.method == Method::Approx {
            let th = &theta.as_ref().expect("theta resolved").theta;
            let pairs = sample_pairs(&axes, 20);
            let d = metrics::reciprocity_defect(
                |tau, y, y0| Ok(approx_ctx(model, th, y0)?.ln_g(tau, y)?.exp()),
                t.tau,
                &pairs,
            )?;
            r.reciprocity_defect = Some(d);
        }
        results.push(r);
    }

    // h-level checks against the solver.
    let mut h_checks = Vec::new();
    if methods.contains(&Method::ApproxB1H) && methods.contains(&Method::Solver) {
        for t in tables.iter().filter(|t| t.method == Method::ApproxB1H) {
            let sf = tables
                .iter()
                .find(|x| x.method == Method::Solver && x.tau == t.tau)
                .and_then(|x| x.field.as_ref())
                .expect("solver ran at every time");
            let hs = field_h(sf, model);
            let (mut e_lead, mut e_b1, mut n) = (0.0, 0.0, 0usize);
            for (row, h) in t.rows.iter().zip(&hs) {
                if let Some(h) = h {
                    e_lead += (row[0] - h).abs();
                    e_b1 += (row[1] - h).abs();
                    n += 1;
                }
            }
            if n > 0 {
                h_checks.push(HCheck {
                    method: Method::ApproxB1H.tag().into(),
                    tau: t.tau,
                    against: "solver".into(),
                    mean_abs_error: e_b1 / n as f64,
                    leading_order_mean_abs_error: Some(e_lead / n as f64),
                    nodes: n,
                });
            }
        }
    }
    if methods.contains(&Method::NonCons) {
        if let ModelKind::Ou { generator, .. } = model.kind() {
            let ou = NonConservativeOu::new(generator.clone())?;
            for t in tables.iter().filter(|t| t.method == Method::NonCons) {
                let (mut err, mut n) = (0.0, 0usize);
                let probe = DensityField::new(t.axes.clone(), vec![0.0; t.rows.len()], t.tau, meta("", &[], Method::NonCons))?;
                for (flat, row) in t.rows.iter().enumerate().step_by(97) {
                    let y = probe.node(flat);
                    let ln_g = |z: &[f64]| -> Result<f64> { Ok(ou.ln_density(t.tau, z, &y0)? - ou.ln_f_inf(z)?) };
                    for i in 0..dim {
                        let step = 1e-5;
                        let mut p = y.clone();
                        let mut q = y.clone();
                        p[i] += step;
                        q[i] -= step;
                        let fd = -(ln_g(&p)? - ln_g(&q)?) / (2.0 * step);
                        err += (row[i] - fd).abs();
                        n += 1;
                    }
                }
                h_checks.push(HCheck {
                    method: Method::NonCons.tag().into(),
                    tau: t.tau,
                    against: "exact".into(),
                    mean_abs_error: err / n.max(1) as f64,
                    leading_order_mean_abs_error: None,
                    nodes: n,
                });
            }
        }
    }

    let rho_values = theta.as_ref().map(|th| {
        let kernel = MatrixKernel::new(th.theta.clone()).expect("resolved theta is symmetric positive definite");
        spec.times.iter().map(|&t| rho(&kernel, t)).collect()
    });
    let summary = RunSummary {
        name: spec.name.clone(),
        model: model.id().into(),
        dim,
        y0: y0.clone(),
        times: spec.times.clone(),
        methods: methods.iter().map(|m| m.tag().to_string()).collect(),
        reference: reference.map(|m| m.tag().to_string()),
        theta: theta.as_ref().map(|t| matrix_rows(&t.theta)),
        theta_source: theta.as_ref().map(|t| source_tag(t.source).to_string()),
        rho: rho_values,
        results,
        h_checks,
        timings,
        solver: if methods.contains(&Method::Solver) { solver_cfg } else { None },
    };
    Ok(Evaluation { tables, summary })
}

fn evaluate_sqrt(spec: &ExperimentSpec, nu: f64, methods: &[Method], reference: Option<Method>) -> Result<Evaluation> {
    if spec.y0.len() != 1 || !(spec.y0[0] > 0.0) {
        return Err(FpxError::config("y0", "the square-root process needs one positive start"));
    }
    for m in methods {
        if !matches!(m, Method::Exact | Method::SqrtApprox) {
            return Err(FpxError::config(
                "methods",
                format!("model `sqrt` supports exact and sqrt-approx, not {}", m.tag()),
            ));
        }
    }
    let theta = match theta_override(spec)? {
        Some(t) if t.nrows() == 1 => t[(0, 0)],
        Some(_) => return Err(FpxError::config("theta", "expected a scalar")),
        None => SQRT_THETA,
    };
    let y0 = spec.y0[0];
    let axes = grid_axes(spec.grid.as_ref().unwrap_or(&default_grid(&ModelChoice::SquareRoot { nu }, 1)), 1)?;
    if axes[0][0] <= 0.0 {
        return Err(FpxError::config("grid.lo", "the square-root grid must be positive"));
    }
    let mut tables = Vec::new();
    let mut timings = BTreeMap::new();
    for m in methods {
        let start = Instant::now();
        for &tau in &spec.times {
            let table = match m {
                Method::Exact => {
                    let f = DensityField::from_fn(axes.clone(), tau, meta("sqrt", &spec.y0, *m), |y| {
                        exact::sqrt_process_density(nu, tau, y[0], y0)
                    })?;
                    Table::from_field(*m, f)
                }
                _ => {
                    let rows = axes[0]
                        .iter()
                        .map(|&y| Ok(vec![extensions::sqrt_h_leading(theta, nu, y0, tau, y)?]))
                        .collect::<Result<Vec<_>>>()?;
                    Table {
                        method: *m,
                        tau,
                        axes: axes.clone(),
                        names: vec!["h".into()],
                        rows,
                        field: None,
                    }
                }
            };
            tables.push(table);
        }
        timings.insert(m.tag().to_string(), start.elapsed().as_secs_f64());
    }
    let mut h_checks = Vec::new();
    for t in tables.iter().filter(|t| t.method == Method::SqrtApprox) {
        let (mut err, mut n) = (0.0, 0usize);
        for (y, row) in axes[0].iter().zip(&t.rows) {
            let ln_g = |z: f64| -> Result<f64> {
                Ok(exact::sqrt_process_ln_density(nu, t.tau, z, y0)? - exact::sqrt_process_ln_f_inf(nu, z))
            };
            let step = 1e-6 * y.max(1.0);
            let h = -(ln_g(y + step)? - ln_g(y - step)?) / (2.0 * step);
            if h.is_finite() {
                err += (row[0] - h).abs();
                n += 1;
            }
        }
        h_checks.push(HCheck {
            method: Method::SqrtApprox.tag().into(),
            tau: t.tau,
            against: "exact".into(),
            mean_abs_error: err / n.max(1) as f64,
            leading_order_mean_abs_error: None,
            nodes: n,
        });
    }
    let results = tables
        .iter()
        .map(|t| MethodResult {
            method: t.method.tag().into(),
            tau: t.tau,
            file: t.file_name(),
            mass: t.field.as_ref().map(|f| f.mass()),
            l1_vs_reference: None,
            linf_vs_reference: None,
            reciprocity_defect: None,
        })
        .collect();
    let summary = RunSummary {
        name: spec.name.clone(),
        model: "sqrt".into(),
        dim: 1,
        y0: spec.y0.clone(),
        times: spec.times.clone(),
        methods: methods.iter().map(|m| m.tag().to_string()).collect(),
        reference: reference.map(|m| m.tag().to_string()),
        theta: Some(vec![vec![theta]]),
        theta_source: Some(if spec.theta.is_some() { "override" } else { "default" }.into()),
        rho: None,
        results,
        h_checks,
        timings,
        solver: None,
    };
    Ok(Evaluation { tables, summary })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn source_tag(s: ThetaSource) -> &'static str {
    match s {
        ThetaSource::ClosedForm => "closed-form",
        ThetaSource::Quadrature => "quadrature",
        ThetaSource::Override => "override",
    }
}

/// Writes the tables and `summary.json` into `dir`, creating it if needed.
/// Files are written in spec order, one at a time.
pub fn write_run(dir: &Path, spec: &ExperimentSpec, eval: &Evaluation) -> Result<()> {
    fs::create_dir_all(dir)?;
    let model = &eval.summary.model;
    for t in &eval.tables {
        fs::write(dir.join(t.file_name()), format_csv(model, &spec.y0, t))?;
    }
    let json = serde_json::to_string_pretty(&eval.summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

/// Output directory: the explicit override, else the run's `output` field, else `runs/<name>`.
pub fn output_dir(spec: &ExperimentSpec, out: Option<&Path>) -> PathBuf {
    match (out, &spec.output) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => PathBuf::from("runs").join(&spec.name),
    }
}

/// Evaluates and writes a run; returns the directory and the summary.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>, threads: Option<usize>) -> Result<(PathBuf, RunSummary)> {
    let eval = evaluate(spec, threads)?;
    let dir = output_dir(spec, out);
    write_run(&dir, spec, &eval)?;
    Ok((dir, eval.summary))
}

/// Mode-doubling study at every time of a solver spec.
pub fn converge(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<(f64, ConvergenceReport)>> {
    spec.validate_times()?;
    let model = match build_model(&spec.model, &spec.params)? {
        ModelChoice::Drift(m) => m,
        ModelChoice::SquareRoot { .. } => {
            return Err(FpxError::config("model", "the solver does not handle the square-root process"))
        }
    };
    let cfg = spec
        .solver
        .as_ref()
        .ok_or_else(|| FpxError::config("solver", "converge needs a [solver] table"))?
        .to_config();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| FpxError::config("threads", e.to_string()))?;
    pool.install(|| {
        spec.times
            .iter()
            .map(|&t| Ok((t, solver::mode_doubling_study(&model, &spec.y0, t, &cfg)?)))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaReport {
    pub model: String,
    pub theta: Vec<Vec<f64>>,
    pub source: String,
    pub quad_error: f64,
    /// Quadrature value, reported next to a closed form for comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_const: Option<f64>,
}

/// Resolved theta for a model, with the quadrature value alongside.
pub fn theta_report(id: &str, params: &toml::Table) -> Result<ThetaReport> {
    let model = match build_model(id, params)? {
        ModelChoice::Drift(m) => m,
        ModelChoice::SquareRoot { .. } => {
            return Ok(ThetaReport {
                model: "sqrt".into(),
                theta: vec![vec![SQRT_THETA]],
                source: "default".into(),
                quad_error: 0.0,
                quadrature: None,
                norm_const: None,
            })
        }
    };
    let est = fisher::resolve_theta(&model, None)?;
    let quadrature = if est.source == ThetaSource::ClosedForm {
        Some(matrix_rows(&fisher::estimate_theta(&model)?.theta))
    } else {
        None
    };
    Ok(ThetaReport {
        model: model.id().into(),
        theta: matrix_rows(&est.theta),
        source: source_tag(est.source).into(),
        quad_error: est.quad_error,
        quadrature,
        norm_const: Some(model.norm_const()),
    })
}

/// Names of the built-in presets.
pub const PRESETS: [&str; 12] = [
    "fig4",
    "fig5a",
    "fig5b",
    "fig6",
    "fig7",
    "fig8",
    "fig-biv-22",
    "fig-biv31",
    "fig-dw1mid",
    "fig-dw1well",
    "fig-dw3mid",
    "fig-dw3well",
];

/// Evaluation times of the one-dimensional figure presets.
pub const FIGURE_TIMES_1D: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 5.0];

fn table(pairs: &[(&str, toml::Value)]) -> toml::Table {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn arr(v: &[f64]) -> toml::Value {
    toml::Value::Array(v.iter().map(|x| toml::Value::Float(*x)).collect())
}

fn solver_spec(half_width: &[f64], modes: &[usize], dt: f64, ic_width: f64) -> SolverSpec {
    SolverSpec {
        half_width: half_width.to_vec(),
        modes: modes.to_vec(),
        dt,
        ic_width,
        conv_tol: None,
        edge_ratio: None,
        smoothing_cells: None,
    }
}

#[allow(clippy::too_many_arguments)]
fn figure(
    name: &str,
    model: &str,
    params: toml::Table,
    y0: &[f64],
    times: &[f64],
    methods: &[&str],
    reference: &str,
    solver: SolverSpec,
) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        model: model.into(),
        params,
        y0: y0.to_vec(),
        times: times.to_vec(),
        methods: methods.iter().map(|s| s.to_string()).collect(),
        reference: Some(reference.into()),
        theta: None,
        grid: None,
        solver: Some(solver),
        output: None,
    }
}

/// The experiment behind one of the figures.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    use toml::Value::Float as F;
    let dw1 = || {
        table(&[
            ("alpha", arr(&[2.0, -2.0])),
            ("beta", arr(&[1.0, 1.0])),
            ("gamma", F(0.5f64.sqrt())),
        ])
    };
    let dw2a = || {
        table(&[
            ("alpha1", arr(&[2.0, 0.0])),
            ("alpha2", arr(&[-2.0, 0.0])),
            ("beta", arr(&[1.0, 1.0])),
            ("gamma", F(0.5)),
        ])
    };
    let dw2b = || {
        table(&[
            ("alpha1", arr(&[2.0, 2.0])),
            ("alpha2", arr(&[-2.0, -2.0])),
            ("beta", arr(&[1.0, 0.7])),
            ("gamma", F(1.0)),
        ])
    };
    let biv = || table(&[("a1", F(1.0)), ("a2", F(3.0)), ("nu", F(10.0))]);
    let t1 = &FIGURE_TIMES_1D;
    let biv_times = [0.1, 0.25, 1.0, 5.0];
    let biv_solver = || solver_spec(&[24.0, 24.0], &[512, 512], 0.01, 0.2);
    let dw_solver = || solver_spec(&[7.0, 7.0], &[256, 256], 5e-3, 0.12);
    let approx_solver = ["approx", "solver"];
    let spec = match name {
        "fig4" => figure(
            name,
            "sech",
            table(&[("gamma_hat", F(1.0)), ("delta_hat", F(2.0))]),
            &[-2.0],
            t1,
            &["approx", "approx-b1-h", "solver"],
            "solver",
            solver_spec(&[16.0], &[1024], 5e-3, 0.1),
        ),
        "fig5a" | "fig5b" => figure(
            name,
            "dryfric",
            toml::Table::new(),
            &[if name == "fig5a" { -2.0 } else { -5.0 }],
            t1,
            &["approx", "exact", "farfield", "solver"],
            "exact",
            solver_spec(&[30.0], &[2048], 2e-3, 0.1),
        ),
        "fig6" => {
            let mut s = solver_spec(&[100.0], &[4096], 0.01, 0.1);
            s.edge_ratio = Some(1e-6);
            figure(
                name,
                "student1d",
                table(&[("gamma_hat", F(0.5))]),
                &[-2.0],
                t1,
                &approx_solver,
                "solver",
                s,
            )
        }
        "fig7" | "fig8" => figure(
            name,
            "dwell1d",
            dw1(),
            &[if name == "fig7" { 0.0 } else { -2.0 }],
            t1,
            &approx_solver,
            "solver",
            solver_spec(&[10.0], &[512], 2e-3, 0.1),
        ),
        "fig-biv-22" => figure(name, "student2d", biv(), &[-2.0, 2.0], &biv_times, &approx_solver, "solver", biv_solver()),
        "fig-biv31" => figure(name, "student2d", biv(), &[3.0, 1.0], &biv_times, &approx_solver, "solver", biv_solver()),
        "fig-dw1mid" => figure(name, "dwell2d", dw2a(), &[0.0, 0.5], &[0.3, 1.0, 1.5, 5.0], &approx_solver, "solver", dw_solver()),
        "fig-dw1well" => figure(name, "dwell2d", dw2a(), &[-1.5, 0.0], &[0.1, 0.8, 2.0, 5.0], &approx_solver, "solver", dw_solver()),
        "fig-dw3mid" => figure(name, "dwell2d", dw2b(), &[-1.0, 1.0], &[0.3, 1.0, 2.0, 5.0], &approx_solver, "solver", dw_solver()),
        "fig-dw3well" => figure(name, "dwell2d", dw2b(), &[1.3, 1.3], &[0.3, 2.0, 5.0, 10.0], &approx_solver, "solver", dw_solver()),
        other => {
            return Err(FpxError::config(
                "preset",
                format!("unknown preset `{other}`; expected one of {}", PRESETS.join(", ")),
            ))
        }
    };
    Ok(spec)
}
