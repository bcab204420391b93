use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible calibration target: {0}")]
    InfeasibleTarget(String),
    #[error("unphysical parameter: {0}")]
    Unphysical(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("time step too large: {0}")]
    StepSize(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("undefined quantity: {0}")]
    Undefined(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
