use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("coupling matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),

    #[error("mode index {k} outside [1, {n}]")]
    InvalidModeIndex { k: usize, n: usize },

    #[error("site index {j} outside [1, {n}]")]
    InvalidSite { j: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative rate {0}")]
    NegativeRate(f64),

    #[error("two engineered reservoirs target mode {0}")]
    DuplicateMode(usize),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("negative expectation value {0:e}")]
    NegativeExpectation(f64),

    #[error("steady state is not unique: {0}")]
    NonUniqueSteadyState(String),

    #[error("direct solve refused for Liouvillian of dimension {dim} (limit {limit}); use time marching")]
    DirectSolveTooLarge { dim: usize, limit: usize },

    #[error("time marching did not converge by t = {t} (|L rho| = {residual:e})")]
    NoConvergence { t: f64, residual: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("{n} spins exceeds the configured cap of {cap}")]
    MemoryBudgetExceeded { n: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
