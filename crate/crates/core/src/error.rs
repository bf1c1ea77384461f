use std::path::PathBuf;

/// Errors produced by belief construction, propagation, planning and config loading.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("control {control:?} outside bounds")]
    ControlOutOfBounds { control: Vec<f64> },

    #[error("innovation covariance is singular (condition number {condition:e})")]
    SingularInnovation { condition: f64 },

    #[error("projected variance {variance:e} along the half-plane normal is degenerate")]
    DegenerateDirection { variance: f64 },

    #[error("edge duration {steps} outside [{min}, {max}] steps")]
    InvalidDuration { steps: usize, min: usize, max: usize },

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("no eigenvalue below {cap} violates the chance constraint everywhere along dimension {dimension}")]
    Unbounded { dimension: usize, cap: f64 },

    #[error("tree is inconsistent: {0}")]
    InconsistentTree(String),

    #[error("replanning failed at step {step}: no feasible plan within budget")]
    ReplanFailed { step: usize },

    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: invalid configuration at line {line}: {message}")]
    Validation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
