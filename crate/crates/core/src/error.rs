use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hilbert-space dimension {0}; need d >= 2")]
    InvalidDimension(usize),

    #[error("operator is not Hermitian (max |A - A^dagger| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("coefficient has imaginary part {imag:e}; input is not Hermitian")]
    ComplexCoefficient { imag: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("measurement set is not informationally complete (smallest Gram eigenvalue {min_eigenvalue:e})")]
    NotInformationallyComplete { min_eigenvalue: f64 },

    #[error("initial state is not identifiable: observability rank {rank}, need {required}")]
    Unidentifiable { rank: usize, required: usize },

    #[error("generator is not skew-symmetric (max |A + A^T| = {residual:e})")]
    NotSkewSymmetric { residual: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("perturbation budget {requested} too large; largest feasible budget found {largest_feasible}")]
    BudgetTooLarge { requested: f64, largest_feasible: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trial with seed {seed:#018x} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
