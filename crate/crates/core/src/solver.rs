//! Fourier spectral collocation for the normalized FPE
//! `f_tau = -div(A f) + lap f` on a periodic box, advanced by an
//! integrating-factor fourth-order Runge–Kutta scheme. Diffusion is applied
//! exactly in Fourier space; the drift flux is formed on the grid and
//! differentiated spectrally with 2/3-rule dealiasing.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{FpxError, Result};
use crate::metrics::{l1_error, DensityField, FieldMeta};
use crate::models::DriftModel;

/// Arrays at least this long are processed in parallel.
const PAR_MIN: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Half-width `L` of `[-L, L)` per axis.
    pub half_width: Vec<f64>,
    /// Fourier modes per axis (power of two, at least 64).
    pub modes: Vec<usize>,
    pub dt: f64,
    /// Standard deviation of the initial Gaussian.
    pub ic_width: f64,
    /// L1 tolerance for mode-doubling acceptance.
    pub conv_tol: f64,
    /// Largest allowed `f_inf(edge) / max f_inf`.
    pub edge_ratio: f64,
    /// Smoothing width for discontinuous drifts, in grid cells.
    pub smoothing_cells: f64,
}

impl SolverConfig {
    pub fn new_1d(half_width: f64, modes: usize, dt: f64, ic_width: f64) -> Self {
        SolverConfig {
            half_width: vec![half_width],
            modes: vec![modes],
            dt,
            ic_width,
            conv_tol: 1e-6,
            edge_ratio: 1e-10,
            smoothing_cells: 4.0,
        }
    }

    pub fn new_2d(half_width: [f64; 2], modes: [usize; 2], dt: f64, ic_width: f64) -> Self {
        SolverConfig {
            half_width: half_width.to_vec(),
            modes: modes.to_vec(),
            dt,
            ic_width,
            conv_tol: 1e-6,
            edge_ratio: 1e-10,
            smoothing_cells: 4.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn step(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.modes[axis] as f64
    }

    /// Grid nodes `-L + i h`, `i < N`, of one axis.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let h = self.step(axis);
        (0..self.modes[axis])
            .map(|i| -self.half_width[axis] + h * i as f64)
            .collect()
    }

    pub fn with_modes(&self, modes: Vec<usize>) -> Self {
        SolverConfig {
            modes,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 || m > 2 || self.half_width.len() != m {
            return Err(FpxError::param(
                "solver",
                "one or two axes with matching half-widths are supported",
            ));
        }
        for a in 0..m {
            let n = self.modes[a];
            if n < 64 || !n.is_power_of_two() {
                return Err(FpxError::param(
                    "solver.modes",
                    format!("{n} is not a power of two of at least 64"),
                ));
            }
            if !(self.half_width[a] > 0.0) {
                return Err(FpxError::param("solver.half_width", "must be positive"));
            }
            if self.ic_width < 2.0 * self.step(a) {
                return Err(FpxError::param(
                    "solver.ic_width",
                    format!(
                        "{} is below two grid cells ({}) on axis {a}",
                        self.ic_width,
                        2.0 * self.step(a)
                    ),
                ));
            }
        }
        if !(self.dt > 0.0) {
            return Err(FpxError::param("solver.dt", "must be positive"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(FpxError::param("solver.conv_tol", "must be positive"));
        }
        Ok(())
    }
}

fn map_indexed<T: Send>(data: &mut [T], f: impl Fn(usize, &mut T) + Sync + Send) {
    if data.len() >= PAR_MIN {
        data.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    } else {
        data.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Signed wavenumbers for the spectral derivative; the Nyquist mode is zeroed.
fn derivative_wavenumbers(n: usize, half_width: f64) -> Vec<f64> {
    let base = PI / half_width;
    (0..n)
        .map(|j| {
            if j < n / 2 {
                base * j as f64
            } else if j == n / 2 {
                0.0
            } else {
                base * (j as f64 - n as f64)
            }
        })
        .collect()
}

fn diffusion_wavenumbers(n: usize, half_width: f64) -> Vec<f64> {
    let base = PI / half_width;
    (0..n)
        .map(|j| {
            let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            base * s
        })
        .collect()
}

fn keep_mode(j: usize, n: usize) -> bool {
    let s = if j <= n / 2 { j } else { n - j };
    3 * s <= n
}

/// FFT plans and spectral symbols for a one- or two-axis periodic grid.
/// One-axis grids are stored as a single row.
struct Spectral {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Option<Arc<dyn Fft<f64>>>,
    col_inv: Option<Arc<dyn Fft<f64>>>,
    /// Derivative wavenumber per flat mode, one array per drift component.
    k: Vec<Vec<f64>>,
    k2: Vec<f64>,
    mask: Vec<bool>,
    drift: Vec<Vec<f64>>,
}

impl Spectral {
    fn new(cfg: &SolverConfig, drift: Vec<Vec<f64>>) -> Self {
        let mut planner = FftPlanner::new();
        let (rows, cols) = if cfg.dim() == 1 {
            (1, cfg.modes[0])
        } else {
            (cfg.modes[0], cfg.modes[1])
        };
        let total = rows * cols;
        let mut k = Vec::new();
        let mut k2 = vec![0.0; total];
        let mut mask = vec![true; total];
        if cfg.dim() == 1 {
            let kd = derivative_wavenumbers(cols, cfg.half_width[0]);
            let kk = diffusion_wavenumbers(cols, cfg.half_width[0]);
            for j in 0..cols {
                k2[j] = kk[j] * kk[j];
                mask[j] = keep_mode(j, cols);
            }
            k.push(kd);
        } else {
            let kd0 = derivative_wavenumbers(rows, cfg.half_width[0]);
            let kd1 = derivative_wavenumbers(cols, cfg.half_width[1]);
            let kk0 = diffusion_wavenumbers(rows, cfg.half_width[0]);
            let kk1 = diffusion_wavenumbers(cols, cfg.half_width[1]);
            let mut k0 = vec![0.0; total];
            let mut k1 = vec![0.0; total];
            for i in 0..rows {
                for j in 0..cols {
                    let f = i * cols + j;
                    k0[f] = kd0[i];
                    k1[f] = kd1[j];
                    k2[f] = kk0[i] * kk0[i] + kk1[j] * kk1[j];
                    mask[f] = keep_mode(i, rows) && keep_mode(j, cols);
                }
            }
            k.push(k0);
            k.push(k1);
        }
        let (col_fwd, col_inv) = if rows > 1 {
            (Some(planner.plan_fft_forward(rows)), Some(planner.plan_fft_inverse(rows)))
        } else {
            (None, None)
        };
        Spectral {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd,
            col_inv,
            k,
            k2,
            mask,
            drift,
        }
    }

    fn len(&self) -> usize {
        self.rows * self.cols
    }

    fn rows_fft(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
        if data.len() >= PAR_MIN {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::default(); fft.get_inplace_scratch_len()],
                |scratch, row| fft.process_with_scratch(row, scratch),
            );
        } else {
            fft.process(data);
        }
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
        // dst is cols x rows.
        if src.len() >= PAR_MIN {
            dst.par_chunks_mut(rows).enumerate().for_each(|(j, out)| {
                for i in 0..rows {
                    out[i] = src[i * cols + j];
                }
            });
        } else {
            for j in 0..cols {
                for i in 0..rows {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        Self::rows_fft(row, data, self.cols);
        if let Some(col) = col {
            let mut t = vec![Complex64::default(); data.len()];
            Self::transpose(data, &mut t, self.rows, self.cols);
            Self::rows_fft(col, &mut t, self.rows);
            Self::transpose(&t, data, self.cols, self.rows);
        }
        if !forward {
            let scale = 1.0 / self.len() as f64;
            map_indexed(data, |_, z| *z *= scale);
        }
    }

    fn to_physical(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut u = spec.to_vec();
        self.transform(&mut u, false);
        u.iter().map(|z| z.re).collect()
    }

    /// Spectral coefficients of `-div(A f)` with dealiasing.
    fn nonlinear(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let u = self.to_physical(spec);
        let mut out = vec![Complex64::default(); self.len()];
        for (c, a) in self.drift.iter().enumerate() {
            let mut flux: Vec<Complex64> = if u.len() >= PAR_MIN {
                u.par_iter().zip(a).map(|(u, a)| Complex64::new(u * a, 0.0)).collect()
            } else {
                u.iter().zip(a).map(|(u, a)| Complex64::new(u * a, 0.0)).collect()
            };
            self.transform(&mut flux, true);
            let k = &self.k[c];
            map_indexed(&mut out, |m, o| {
                // -(i k) F
                let f = flux[m];
                *o += Complex64::new(k[m] * f.im, -k[m] * f.re);
            });
        }
        map_indexed(&mut out, |m, o| {
            if !self.mask[m] {
                *o = Complex64::default();
            }
        });
        out
    }

    /// One integrating-factor RK4 step; `e_half` is `exp(-k^2 dt / 2)`.
    fn step(&self, v: &mut [Complex64], dt: f64, e_half: &[f64]) {
        let n = v.len();
        let k1 = self.nonlinear(v);
        let mut w = vec![Complex64::default(); n];
        map_indexed(&mut w, |m, x| *x = e_half[m] * (v[m] + 0.5 * dt * k1[m]));
        let k2 = self.nonlinear(&w);
        map_indexed(&mut w, |m, x| *x = e_half[m] * v[m] + 0.5 * dt * k2[m]);
        let k3 = self.nonlinear(&w);
        map_indexed(&mut w, |m, x| {
            *x = e_half[m] * e_half[m] * v[m] + e_half[m] * dt * k3[m]
        });
        let k4 = self.nonlinear(&w);
        map_indexed(v, |m, x| {
            let e = e_half[m];
            *x = e * e * *x
                + dt / 6.0 * (e * e * k1[m] + 2.0 * e * (k2[m] + k3[m]) + k4[m]);
        });
    }
}

fn grid_nodes(cfg: &SolverConfig) -> Vec<Vec<f64>> {
    (0..cfg.dim()).map(|a| cfg.axis(a)).collect()
}

fn for_each_node(cfg: &SolverConfig, mut f: impl FnMut(usize, &[f64])) {
    let axes = grid_nodes(cfg);
    if cfg.dim() == 1 {
        for (i, &x) in axes[0].iter().enumerate() {
            f(i, &[x]);
        }
    } else {
        let n1 = axes[1].len();
        for (i, &x) in axes[0].iter().enumerate() {
            for (j, &y) in axes[1].iter().enumerate() {
                f(i * n1 + j, &[x, y]);
            }
        }
    }
}

/// Solves from a Gaussian of width `cfg.ic_width` at `y0` for an arbitrary
/// drift and returns the fields at `times`.
pub fn solve_with_drift<D>(
    drift: D,
    y0: &[f64],
    times: &[f64],
    cfg: &SolverConfig,
    meta: FieldMeta,
) -> Result<Vec<DensityField>>
where
    D: Fn(&[f64], &mut [f64]),
{
    cfg.validate()?;
    let m = cfg.dim();
    if y0.len() != m {
        return Err(FpxError::DimensionMismatch {
            expected: m,
            got: y0.len(),
        });
    }
    for a in 0..m {
        if y0[a].abs() > cfg.half_width[a] - 4.0 * cfg.ic_width {
            return Err(FpxError::param(
                "y0",
                format!("{} is within four IC widths of the edge", y0[a]),
            ));
        }
    }
    if times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(FpxError::param("times", "must be positive and sorted"));
    }

    let axes = grid_nodes(cfg);
    let total: usize = cfg.modes.iter().product();
    let mut drift_grid = vec![vec![0.0; total]; m];
    let mut ic = vec![Complex64::default(); total];
    let eps2 = cfg.ic_width * cfg.ic_width;
    let ic_norm = (2.0 * PI * eps2).powf(-0.5 * m as f64);
    let mut a = vec![0.0; m];
    for_each_node(cfg, |flat, x| {
        drift(x, &mut a);
        for c in 0..m {
            drift_grid[c][flat] = a[c];
        }
        let r2: f64 = x.iter().zip(y0).map(|(x, y)| (x - y) * (x - y)).sum();
        ic[flat] = Complex64::new(ic_norm * (-r2 / (2.0 * eps2)).exp(), 0.0);
    });
    if drift_grid.iter().flatten().any(|v| !v.is_finite()) {
        return Err(FpxError::Domain("drift is not finite on the solver grid".into()));
    }

    let spectral = Spectral::new(cfg, drift_grid);
    let cell: f64 = (0..m).map(|a| cfg.step(a)).product();
    let mut v = ic;
    spectral.transform(&mut v, true);

    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / cfg.dt - 1e-9).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            let e_half: Vec<f64> = spectral.k2.iter().map(|k2| (-0.5 * k2 * dt).exp()).collect();
            for s in 0..steps {
                spectral.step(&mut v, dt, &e_half);
                if s % 64 == 63 {
                    check_health(&spectral, &v, cell, t + dt * (s + 1) as f64)?;
                }
            }
            t = target;
        }
        let u = check_health(&spectral, &v, cell, t)?;
        check_boundary(cfg, &u, cell, t)?;
        out.push(DensityField::new(axes.clone(), u, t, meta.clone())?);
    }
    Ok(out)
}

fn check_health(spectral: &Spectral, v: &[Complex64], cell: f64, tau: f64) -> Result<Vec<f64>> {
    let u = spectral.to_physical(v);
    let abs_mass: f64 = u.iter().map(|x| x.abs()).sum::<f64>() * cell;
    if !abs_mass.is_finite() || abs_mass > 1.0 + 1e-3 {
        return Err(FpxError::Instability {
            mass: abs_mass,
            tau,
        });
    }
    Ok(u)
}

fn check_boundary(cfg: &SolverConfig, u: &[f64], cell: f64, tau: f64) -> Result<()> {
    let mut edge = 0.0;
    if cfg.dim() == 1 {
        let n = u.len();
        for i in [0, 1, n - 2, n - 1] {
            edge += u[i].abs();
        }
    } else {
        let (rows, cols) = (cfg.modes[0], cfg.modes[1]);
        for i in 0..rows {
            for j in 0..cols {
                if i < 2 || i >= rows - 2 || j < 2 || j >= cols - 2 {
                    edge += u[i * cols + j].abs();
                }
            }
        }
    }
    let edge_mass = edge * cell;
    if edge_mass > 1e-8 {
        return Err(FpxError::BoundaryInteraction { edge_mass, tau });
    }
    Ok(())
}

/// Drift used on the grid: discontinuous drifts (dry friction) become
/// `-tanh(y / w)` with `w = smoothing_cells` grid cells.
pub fn grid_drift<'a>(model: &'a DriftModel, cfg: &SolverConfig) -> impl Fn(&[f64], &mut [f64]) + 'a {
    let width = if model.discontinuities().is_empty() {
        None
    } else {
        Some(cfg.smoothing_cells * cfg.step(0))
    };
    move |y: &[f64], out: &mut [f64]| match width {
        Some(w) => out[0] = -(y[0] / w).tanh(),
        None => model.drift_into(y, out),
    }
}

/// Checks that `f_inf` has decayed to `cfg.edge_ratio` of its peak on the box edge.
pub fn check_domain(model: &DriftModel, cfg: &SolverConfig) -> Result<()> {
    let mut peak = f64::NEG_INFINITY;
    let mut edge = f64::NEG_INFINITY;
    let n = cfg.modes.clone();
    let is_edge = |flat: usize| -> bool {
        if n.len() == 1 {
            flat == 0
        } else {
            let (i, j) = (flat / n[1], flat % n[1]);
            i == 0 || j == 0
        }
    };
    for_each_node(cfg, |flat, x| {
        let l = model.ln_f_inf(x);
        peak = peak.max(l);
        if is_edge(flat) {
            edge = edge.max(l);
        }
    });
    // The periodic box also touches +L on every axis.
    let far: Vec<f64> = cfg.half_width.clone();
    edge = edge.max(model.ln_f_inf(&far));
    if cfg.dim() == 1 {
        edge = edge.max(model.ln_f_inf(&[-cfg.half_width[0]]));
    }
    let ratio = (edge - peak).exp();
    if ratio > cfg.edge_ratio {
        return Err(FpxError::param(
            "solver.half_width",
            format!(
                "f_inf at the box edge is {ratio:.3e} of its peak (limit {:.1e}); enlarge the domain",
                cfg.edge_ratio
            ),
        ));
    }
    Ok(())
}

/// Solves the FPE for `model` from `y0` and returns the fields at `times`.
pub fn solve_fpe(
    model: &DriftModel,
    y0: &[f64],
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<DensityField>> {
    cfg.validate()?;
    if model.dim() != cfg.dim() {
        return Err(FpxError::DimensionMismatch {
            expected: model.dim(),
            got: cfg.dim(),
        });
    }
    check_domain(model, cfg)?;
    let meta = FieldMeta {
        model: model.id().to_string(),
        y0: y0.to_vec(),
        method: "solver".into(),
    };
    solve_with_drift(grid_drift(model, cfg), y0, times, cfg, meta)
}

/// Restricts a field on a grid with `factor` times more nodes per axis.
pub fn restrict(fine: &DensityField, factor: usize) -> Result<DensityField> {
    let axes: Vec<Vec<f64>> = fine.axes.iter().map(|a| a.iter().step_by(factor).cloned().collect()).collect();
    let values = if axes.len() == 1 {
        fine.values.iter().step_by(factor).cloned().collect()
    } else {
        let cols = fine.axes[1].len();
        let mut v = Vec::with_capacity(axes[0].len() * axes[1].len());
        for i in (0..fine.axes[0].len()).step_by(factor) {
            for j in (0..cols).step_by(factor) {
                v.push(fine.values[i * cols + j]);
            }
        }
        v
    };
    DensityField::new(axes, values, fine.tau, fine.meta.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Mode counts of the first axis that were run.
    pub modes: Vec<usize>,
    /// L1 difference between successive resolutions, on the coarser grid.
    pub differences: Vec<f64>,
    /// Mode count of the accepted (coarser) resolution.
    pub accepted: usize,
}

/// Runs `N` and `2N` per axis until the L1 difference at `time` falls below
/// `cfg.conv_tol`, up to 4096 modes in 1D and 1024 per axis in 2D.
pub fn mode_doubling_study(
    model: &DriftModel,
    y0: &[f64],
    time: f64,
    cfg: &SolverConfig,
) -> Result<ConvergenceReport> {
    let max = if cfg.dim() == 1 { 4096 } else { 1024 };
    let mut modes = cfg.modes.clone();
    let mut current = solve_fpe(model, y0, &[time], cfg)?.pop().expect("one time requested");
    let mut report = ConvergenceReport {
        modes: vec![modes[0]],
        differences: Vec::new(),
        accepted: 0,
    };
    while modes.iter().all(|&n| 2 * n <= max) {
        let finer: Vec<usize> = modes.iter().map(|n| 2 * n).collect();
        let fine = solve_fpe(model, y0, &[time], &cfg.with_modes(finer.clone()))?
            .pop()
            .expect("one time requested");
        let diff = l1_error(&current, &restrict(&fine, 2)?)?;
        report.modes.push(finer[0]);
        report.differences.push(diff);
        if diff < cfg.conv_tol {
            report.accepted = modes[0];
            return Ok(report);
        }
        modes = finer;
        current = fine;
    }
    Err(FpxError::NoConvergence {
        differences: report.differences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingStudy {
    /// Smoothing widths `w`, halved at each level along with the grid step.
    pub widths: Vec<f64>,
    pub modes: Vec<usize>,
    /// L1 distance to the closed-form dry-friction density.
    pub l1_to_exact: Vec<f64>,
}

/// Dry friction with the smoothed drift at three widths, each half the last
/// (the mode count doubles so `w` stays at `smoothing_cells` cells), compared
/// with the closed form at `tau`.
pub fn dry_friction_smoothing_study(y0: f64, tau: f64, cfg: &SolverConfig) -> Result<SmoothingStudy> {
    let model = crate::models::make_dry_friction();
    let mut study = SmoothingStudy {
        widths: Vec::new(),
        modes: Vec::new(),
        l1_to_exact: Vec::new(),
    };
    for level in 0..3 {
        let c = cfg.with_modes(vec![cfg.modes[0] << level]);
        let field = solve_fpe(&model, &[y0], &[tau], &c)?.pop().expect("one time requested");
        let exact = DensityField::from_fn(field.axes.clone(), tau, field.meta.clone(), |y| {
            crate::exact::dryfric_density(tau, y[0], y0)
        })?;
        study.widths.push(c.smoothing_cells * c.step(0));
        study.modes.push(c.modes[0]);
        study.l1_to_exact.push(l1_error(&field, &exact)?);
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::OuExact;
    use crate::models::*;

    fn ou_l1(field: &DensityField, y0: f64, eps: f64) -> f64 {
        let ex = OuExact::one_dim(1.0, 0.0).unwrap();
        let exact = DensityField::from_fn(field.axes.clone(), field.tau, field.meta.clone(), |y| {
            Ok(ex.ln_density_from_gaussian(field.tau, y, &[y0], eps)?.exp())
        })
        .unwrap();
        l1_error(field, &exact).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new_1d(10.0, 256, 1e-3, 0.2).validate().is_ok());
        assert!(SolverConfig::new_1d(10.0, 200, 1e-3, 0.2).validate().is_err());
        assert!(SolverConfig::new_1d(10.0, 32, 1e-3, 1.0).validate().is_err());
        assert!(SolverConfig::new_1d(10.0, 256, 1e-3, 0.1).validate().is_err());
        assert!(SolverConfig::new_1d(10.0, 256, 0.0, 0.2).validate().is_err());
    }

    #[test]
    fn ou_matches_convolved_exact() {
        let m = make_ou_1d(1.0, 0.0).unwrap();
        let cfg = SolverConfig::new_1d(10.0, 256, 1e-3, 0.2);
        let fields = solve_fpe(&m, &[2.0], &[0.1, 1.0, 5.0], &cfg).unwrap();
        for f in &fields {
            let e = ou_l1(f, 2.0, 0.2);
            assert!(e < 1e-6, "tau={} l1={e}", f.tau);
            assert!((f.mass() - 1.0).abs() < 1e-10);
            assert!(f.min_value() > -1e-8 * f.max_value());
        }
    }

    #[test]
    fn pure_diffusion_is_heat_kernel() {
        let cfg = SolverConfig::new_1d(40.0, 1024, 0.05, 0.2);
        let meta = FieldMeta {
            model: "zero".into(),
            y0: vec![0.0],
            method: "solver".into(),
        };
        let f = solve_with_drift(|_, a| a[0] = 0.0, &[0.0], &[0.5], &cfg, meta)
            .unwrap()
            .pop()
            .unwrap();
        let var = 2.0 * 0.5 + 0.04;
        let exact = DensityField::from_fn(f.axes.clone(), 0.5, f.meta.clone(), |y| {
            Ok((-y[0] * y[0] / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
        })
        .unwrap();
        assert!(l1_error(&f, &exact).unwrap() < 1e-6);
    }

    #[test]
    fn ou_mode_doubling() {
        let m = make_ou_1d(1.0, 0.0).unwrap();
        let mut cfg = SolverConfig::new_1d(10.0, 256, 1e-3, 0.2);
        cfg.conv_tol = 1e-8;
        let r = mode_doubling_study(&m, &[2.0], 1.0, &cfg).unwrap();
        assert_eq!(r.accepted, 256);
        assert!(r.differences[0] < 1e-8);
    }

    #[test]
    fn double_well_doubling_decays() {
        let m = make_double_well_1d([2.0, -2.0], [1.0, 1.0], 0.5f64.sqrt()).unwrap();
        let cfg = SolverConfig::new_1d(10.0, 256, 2e-3, 0.2);
        let coarse = solve_fpe(&m, &[0.5], &[1.0], &cfg).unwrap().pop().unwrap();
        let mid = solve_fpe(&m, &[0.5], &[1.0], &cfg.with_modes(vec![512])).unwrap().pop().unwrap();
        let fine = solve_fpe(&m, &[0.5], &[1.0], &cfg.with_modes(vec![1024])).unwrap().pop().unwrap();
        let d1 = l1_error(&coarse, &restrict(&mid, 2).unwrap()).unwrap();
        let d2 = l1_error(&mid, &restrict(&fine, 2).unwrap()).unwrap();
        assert!(d1 > 10.0 * d2, "{d1} {d2}");
    }

    #[test]
    fn time_step_order() {
        let m = make_sech_power(1.0, 2.0).unwrap();
        let cfg = SolverConfig::new_1d(16.0, 256, 0.04, 0.3);
        let run = |dt: f64| {
            let mut c = cfg.clone();
            c.dt = dt;
            solve_fpe(&m, &[-2.0], &[1.0], &c).unwrap().pop().unwrap()
        };
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let ratio = l1_error(&a, &b).unwrap() / l1_error(&b, &c).unwrap();
        assert!((14.0..=18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn boundary_and_domain_errors() {
        let m = make_student_t_1d(0.5).unwrap();
        let cfg = SolverConfig::new_1d(10.0, 256, 1e-3, 0.2);
        assert!(check_domain(&m, &cfg).is_err());
        let ou = make_ou_1d(1.0, 0.0).unwrap();
        let small = SolverConfig::new_1d(4.0, 128, 1e-3, 0.15);
        let mut loose = small.clone();
        loose.edge_ratio = 1.0;
        let r = solve_fpe(&ou, &[3.0], &[0.5], &loose);
        assert!(matches!(r, Err(FpxError::BoundaryInteraction { .. })), "{r:?}");
        assert!(solve_fpe(&ou, &[9.5], &[0.5], &cfg).is_err());
    }

    #[test]
    fn two_dim_ou_matches_exact() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.5]);
        let m = make_ou_nd(a.clone(), vec![0.0, 0.0]).unwrap();
        let cfg = SolverConfig::new_2d([8.0, 8.0], [128, 128], 5e-3, 0.3);
        let f = solve_fpe(&m, &[1.0, -0.5], &[0.5], &cfg).unwrap().pop().unwrap();
        let ex = OuExact::new(a, vec![0.0, 0.0]).unwrap();
        let exact = DensityField::from_fn(f.axes.clone(), 0.5, f.meta.clone(), |y| {
            Ok(ex.ln_density_from_gaussian(0.5, y, &[1.0, -0.5], 0.3)?.exp())
        })
        .unwrap();
        assert!(l1_error(&f, &exact).unwrap() < 1e-6);
        assert!((f.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dry_friction_smoothing_converges() {
        let cfg = SolverConfig::new_1d(25.0, 512, 2e-3, 0.35);
        let s = dry_friction_smoothing_study(-2.0, 1.0, &cfg).unwrap();
        assert!(s.l1_to_exact[1] < s.l1_to_exact[0] && s.l1_to_exact[2] < s.l1_to_exact[1], "{s:?}");
        for (w, e) in s.widths.iter().zip(&s.l1_to_exact) {
            assert!(*e < *w, "w={w} l1={e}");
        }
    }
}
