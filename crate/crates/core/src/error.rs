use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0}, {1}) lies outside the chart domain")]
    Domain(f64, f64),
    #[error("reduction to the fundamental domain exceeded the word-length cap of {0}")]
    WordCap(usize),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("band overflow: truncated mass {leakage:.3e} exceeds tolerance {tolerance:.3e}")]
    Leakage { leakage: f64, tolerance: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("Newton iteration failed: {0}")]
    Newton(String),
    #[error("Riccati solution blew up at t = {0}")]
    RiccatiBlowUp(f64),
    #[error("least-squares system is rank deficient: kernel dimension {kernel_dim}")]
    RankDeficient { kernel_dim: usize },
    #[error("statistics: {0}")]
    Statistics(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
