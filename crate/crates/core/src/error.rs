use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Gram matrix is near-singular (condition estimate {condition:.3e} exceeds {threshold:.3e})")]
    NearSingularGram { condition: f64, threshold: f64 },

    #[error("invalid Gram matrix: {0}")]
    InvalidGram(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),

    #[error("exhaustive search needs {candidates} candidates, budget is {budget}")]
    BudgetExceeded { candidates: u128, budget: u64 },

    #[error("decorrelating detector requires A = I")]
    NotIdentityMatrix,

    #[error("bound hypothesis violated: |r_min| = {rmin} must exceed 2*tau = {two_tau}")]
    HypothesisViolated { rmin: f64, two_tau: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("trial {trial} at M={m}, snr={snr_db} dB: {source}")]
    Trial {
        trial: u64,
        m: usize,
        snr_db: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("malformed matrix file: {0}")]
    MatrixFile(String),
}
