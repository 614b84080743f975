//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FpxError, Result};

/// Largest absolute entry of `m - m^T`, relative to the largest entry of `m`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() / scale
}

pub fn require_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(FpxError::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let a = asymmetry(m);
    if a > tol {
        return Err(FpxError::NotSymmetric { asymmetry: a });
    }
    Ok(())
}

/// Symmetric eigendecomposition of the symmetrized input.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = 0.5 * (m + m.transpose());
    SymmetricEigen::new(sym)
}

/// `V diag(f(lambda)) V^T` for a symmetric decomposition.
pub fn apply_spectral(
    eigvecs: &DMatrix<f64>,
    eigvals: &DVector<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&eigvals.map(f));
    eigvecs * d * eigvecs.transpose()
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.is_square() && asymmetry(m) < 1e-10 && sym_eigen(m).eigenvalues.iter().all(|&l| l > 0.0)
}

/// Quadratic form `v^T m v`.
pub fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * v[j];
        }
        s += v[i] * row;
    }
    s
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Matrix exponential of a general square matrix.
///
/// Scaling-and-squaring with a Padé approximant (nalgebra's implementation),
/// which stays accurate for defective matrices such as Jordan blocks.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| FpxError::Singular(what.to_string()))
}
