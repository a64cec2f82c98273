use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by estimation, evaluation and optimization routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("invalid sample: {0}")]
    Sample(String),

    #[error("design matrix is rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("MTE requested on [{lo}, {hi}] outside the identified range [{range_lo}, {range_hi}]")]
    Extrapolation {
        lo: f64,
        hi: f64,
        range_lo: f64,
        range_hi: f64,
    },

    #[error("{} row(s) need the MTE outside its identified range (first rows: {:?})", rows.len(), &rows[..rows.len().min(10)])]
    ExtrapolationRows { rows: Vec<usize> },

    #[error("MTE not identified: {0}")]
    Identification(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("covariate cells without both instrument arms: {cells:?}")]
    MissingArm { cells: Vec<usize> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver limit reached: {0}")]
    SolverLimit(String),

    #[error("policy is the empty sentinel (no feasible rule)")]
    EmptyPolicy,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn config<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}
