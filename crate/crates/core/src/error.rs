use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("detuning {delta} rad/s lies outside the dispersive regime")]
    OutsideDispersiveRegime { delta: f64 },

    #[error("dressed branches are degenerate at zero detuning")]
    DegenerateBranch,

    #[error("dressed detuning {delta_prime} rad/s is inside the avoided crossing (|Δ'| < 2g = {limit})")]
    InsideAvoidedCrossing { delta_prime: f64, limit: f64 },

    #[error("integration failed: estimated error {max_local_error:e} exceeds tolerance {tolerance:e}")]
    IntegrationFailure { max_local_error: f64, tolerance: f64 },

    #[error("state lost positivity: minimum eigenvalue {min_eigenvalue:e}")]
    Positivity { min_eigenvalue: f64 },

    #[error("basis is ill-conditioned (condition number {condition:e})")]
    IllConditionedBasis { condition: f64 },

    #[error("fit initialization failed: {0}")]
    FitInitialization(String),

    #[error("fit did not converge after {iterations} iterations (rss {rss:e})")]
    FitFailure { iterations: usize, rss: f64 },

    #[error("under-determined reconstruction: {samples} samples for {unknowns} unknowns")]
    UnderDetermined { samples: usize, unknowns: usize },

    #[error("config error at {context}: {message}")]
    Config { context: String, message: String },

    #[error("usage: {message}{}", registered_suffix(registered))]
    Usage { message: String, registered: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn registered_suffix(registered: &[String]) -> String {
    if registered.is_empty() { String::new() } else { format!("; registered: {}", registered.join(", ")) }
}
