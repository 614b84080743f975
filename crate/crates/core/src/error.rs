use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum FpxError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge (last two iterates: {last:?} and {previous:?})")]
    QuadratureNonConvergence { last: Vec<f64>, previous: Vec<f64> },

    #[error("non-finite integrand at path parameter s = {s}")]
    NonFiniteIntegrand { s: f64 },

    #[error("log-density {log_value} outside representable range")]
    Overflow { log_value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unstable generator: eigenvalue {re} + {im}i has nonpositive real part")]
    UnstableGenerator { re: f64, im: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("solver domain too small: {0}")]
    Domain(String),

    #[error("density interacts with the periodic boundary: edge mass {edge_mass:e} at tau = {tau}")]
    BoundaryInteraction { edge_mass: f64, tau: f64 },

    #[error("numerical instability: mass {mass} at tau = {tau}")]
    Instability { mass: f64, tau: f64 },

    #[error("mode doubling did not converge; L1 differences {differences:?}")]
    NoConvergence { differences: Vec<f64> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FpxError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        FpxError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        FpxError::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_spec_error(&self) -> bool {
        matches!(
            self,
            FpxError::InvalidParameter { .. }
                | FpxError::DimensionMismatch { .. }
                | FpxError::Config { .. }
                | FpxError::NotSymmetric { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FpxError>;
