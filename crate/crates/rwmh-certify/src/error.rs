//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by certificate construction, verification, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} in {context}")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("invalid parameter {name}={value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("{what} did not converge after {iterations} iterations (last iterate near {last:?})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: Vec<f64>,
    },

    #[error("non-finite log-density encountered at {at:?} during {context}")]
    NonFiniteLogDensity { at: Vec<f64>, context: &'static str },

    #[error("degenerate cone volume: box probability is zero to tolerance in drift_factor")]
    DegenerateConeVolume,

    #[error("drift factor degenerate: lambda_tilde = 1")]
    DriftFactorDegenerate,

    #[error("R_eps bracket degenerate; shrink delta (bracket base {base} <= K_eps {k_eps})")]
    REpsBracketDegenerate { base: f64, k_eps: f64 },

    #[error("proposal strong-convexity margin violated: conductance bound {value} >= 1")]
    ConductanceValidity { value: f64 },

    #[error("degenerate strong-convexity sum: m1 <= -m ({m1} <= -{m})")]
    ConvexitySum { m: f64, m1: f64 },

    #[error("curvature margin violated: eta * lambda2 >= gamma ({eta} * {lambda2} >= {gamma})")]
    CurvatureMargin { eta: f64, lambda2: f64, gamma: f64 },

    #[error("quadrature tolerance not met in {context}: best estimate {estimate} (error ~{error})")]
    QuadratureTolerance {
        context: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("oracle restricted to p <= 2 (got p = {dim})")]
    OracleDimension { dim: usize },

    #[error("refine grid or shrink extent: diagonal entry {value} at cell {cell} is negative")]
    NegativeDiagonal { cell: usize, value: f64 },

    #[error("dataset row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code: 1 for validation problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Dataset { .. }
            | Error::OracleDimension { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
