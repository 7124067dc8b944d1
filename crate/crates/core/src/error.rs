use thiserror::Error;

pub type Result<T> = std::result::Result<T, CopulaError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopulaError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value {value} at node ({u}, {v})")]
    NonFiniteNode { u: f64, v: f64, value: f64 },

    #[error("non-finite value {value} at t = {t}")]
    NonFiniteLimit { t: f64, value: f64 },

    #[error("no strategy available to compute {functional} for copula {copula}; supply a closed form or a sampler")]
    NoStrategy {
        functional: &'static str,
        copula: String,
    },

    #[error("copula {0} has no sampler")]
    NoSampler(String),

    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("expected pseudo-observations; apply pseudo_observations to raw data first")]
    NotPseudo,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
