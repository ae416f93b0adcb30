use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid assignment: expected {expected} spins, got {got}")]
    InvalidAssignment { expected: usize, got: usize },

    #[error("resource limit: {what} requires n <= {cap}, got n = {n}")]
    ResourceLimit { what: &'static str, cap: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate spectrum: c_min == c_max == {0}")]
    DegenerateSpectrum(i64),

    #[error("invalid temperature: {0}")]
    InvalidTemperature(f64),

    #[error("degenerate temperature {value} from the temperature law (c_min = {c_min}, n = {n}, p = {p})")]
    DegenerateTemperature { value: f64, c_min: i64, n: usize, p: usize },

    #[error("missing angle table entry for p = {0}")]
    MissingTableEntry(usize),

    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, last_good: Vec<f64> },

    #[error("fit failure: {message} (best iterate {best:?})")]
    FitFailure { message: String, best: Vec<f64> },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("target {target} outside supported range [{lo}, {hi}]")]
    OutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("projection did not converge after {iterations} iterations (residuals {residuals:?})")]
    Convergence { iterations: usize, residuals: [f64; 2] },

    #[error("target probability {target} is unattainable: the scaling law saturates at a = {ceiling}")]
    UnattainableTarget { target: f64, ceiling: f64 },

    #[error("parse error in {file} at byte {offset}: {message}")]
    Parse { file: String, offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
