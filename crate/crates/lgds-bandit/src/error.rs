use thiserror::Error;

/// Errors surfaced by the numerics, environment, and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("Riccati iteration did not converge within {iterations} iterations (residual {residual:.3e})")]
    RiccatiDivergence { iterations: usize, residual: f64 },

    #[error("environment generation failed: {0}")]
    Generation(String),

    #[error("unsupported environment: {0}")]
    UnsupportedEnvironment(String),

    #[error("perturbation failed: {0}")]
    Perturbation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
