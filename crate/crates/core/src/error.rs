use thiserror::Error;

/// Errors produced by the model, simulator and controller layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular matrix in {context}")]
    Singular { context: String },

    #[error("impact singularity: contact Jacobian is rank deficient (sigma_min = {sigma_min:.3e})")]
    ImpactSingularity { sigma_min: f64 },

    #[error("DAE singularity: double-support KKT system is not solvable")]
    DaeSingularity,

    #[error("controller error: {0}")]
    Controller(String),

    #[error("governor reference infeasible: constraint {index} evaluates to {value:.6} at the steady state")]
    InfeasibleReference { index: usize, value: f64 },

    #[error("QP infeasible")]
    QpInfeasible,

    #[error("tuning failed: {0}")]
    TuningFailed(String),

    #[error("log parse error at line {line}: {msg}")]
    LogParse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
