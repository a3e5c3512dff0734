use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` is not a finite number")]
    NonFinite { name: &'static str },

    #[error("source variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("correlation coefficient must be non-negative, got {0}")]
    NegativeCorrelation(f64),

    #[error("rho^2 = {rho_sq} exceeds normalized private variance r = {r}")]
    CorrelationExceedsVariance { rho_sq: f64, r: f64 },

    #[error("MMSE must be positive, got {0}")]
    NonPositiveMmse(f64),

    #[error("privacy target {target} exceeds the maximum achievable {max}")]
    InfeasibleTarget { target: f64, max: f64 },

    #[error("privacy target must be positive")]
    DegenerateTarget,

    #[error("target {target} is not reachable without encoder noise for a degenerate model (rho^2 = r)")]
    NoiselessUnattainable { target: f64 },

    #[error("invalid encoder policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("test-channel noise variance must be positive for a finite rate, got {0}")]
    InfiniteRate(f64),

    #[error("argument outside the admissible domain: {0}")]
    OutOfDomain(String),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no feasible point found for privacy target {0}")]
    EmptyFeasibleSet(f64),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
