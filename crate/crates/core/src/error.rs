use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmaxError {
    #[error("parameters must be finite (e0={e0}, emax={emax}, log_ed50={log_ed50})")]
    NonFiniteParams { e0: f64, emax: f64, log_ed50: f64 },
    #[error("invalid observation: {0}")]
    InvalidData(String),
    #[error("at least {needed} distinct dose levels are required, found {found}")]
    TooFewDoseLevels { needed: usize, found: usize },
    #[error("at least one positive dose is required")]
    NoPositiveDose,
    #[error("expected information matrix is singular or ill-conditioned")]
    SingularInformation,
    #[error("confidence level must lie strictly inside (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("shape classification needs at least 3 dose arms, found {0}")]
    InsufficientArms(usize),
    #[error("{failed} of {total} bootstrap refits failed; bands withheld")]
    TooManyFailures { failed: usize, total: usize },
    #[error("target shape unreachable: acceptance rate {rate:.2e} over {probes} probe draws")]
    ShapeUnreachable { rate: f64, probes: usize },
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = EmaxError> = std::result::Result<T, E>;
