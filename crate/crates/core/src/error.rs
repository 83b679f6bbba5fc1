use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mean-zero constraint violated: |v(1)| = {residual:e} exceeds {limit:e}")]
    ConstraintViolation { residual: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no blowup evidence: {0}")]
    NoBlowupEvidence(String),

    #[error("interpolation failure: {0}")]
    Interpolation(String),

    #[error("point outside sampled domain: {0}")]
    OutOfDomain(String),

    #[error("unknown profile family `{0}`")]
    UnknownFamily(String),

    #[error("lemma counterexample at trial {trial}: weights {weights:?}, k = {k}")]
    Counterexample { trial: usize, weights: Vec<f64>, k: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
