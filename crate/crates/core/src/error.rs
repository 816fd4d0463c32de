use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HumError>;

#[derive(Debug, Error)]
pub enum HumError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid interval: start {start} must be below end {end}")]
    InvalidInterval { start: f64, end: f64 },

    #[error("control region [{start}, {end}] contains no grid node")]
    EmptyControlRegion { start: f64, end: f64 },

    #[error("layout mismatch: expected {expected} degrees of freedom, got {actual}")]
    LayoutMismatch { expected: usize, actual: usize },

    #[error("grid too small for {bc} generator: n_x = {n_x}, need at least 2")]
    GridTooSmall { bc: &'static str, n_x: usize },

    #[error("implicit step matrix is singular")]
    SingularStep,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("CG breakdown at iteration {iteration}: <g_bar, w> = {curvature:e} is not positive")]
    ZeroDirectionBreakdown { iteration: usize, curvature: f64 },

    #[error("problem too large for dense oracle: {n_dof} dofs (limit {limit})")]
    ProblemTooLarge { n_dof: usize, limit: usize },

    #[error("insufficient data for cost fit: {0}")]
    InsufficientData(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("datum file {path}: {message}")]
    DatumFile { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HumError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HumError::Io {
            path: path.into(),
            source,
        }
    }
}
