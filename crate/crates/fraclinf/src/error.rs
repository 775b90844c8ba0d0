use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("trivial exterior data: {0}")]
    TrivialData(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("unknown {family} profile `{name}` (available: {available})")]
    UnknownProfile {
        family: &'static str,
        name: String,
        available: String,
    },

    #[error(
        "adaptive quadrature did not converge: value {value:.6e}, achieved error {achieved:.3e}, requested {requested:.3e}"
    )]
    QuadratureNoConverge {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("line search failed after {backtracks} backtracks (iteration {iteration})")]
    LineSearchFailure { iteration: usize, backtracks: usize },

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
