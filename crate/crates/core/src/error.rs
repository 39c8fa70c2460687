use thiserror::Error;

/// Errors raised by model construction, simulation and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter failed validation. `field` names the offending input.
    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("arrival rate is zero at price {price}; the cycle cannot complete")]
    NoArrivals { price: f64 },

    #[error("tail window is empty for d_k = {d_k}, xi = {xi}")]
    EmptyTailWindow { d_k: usize, xi: f64 },

    #[error("policy became non-finite at cycle {cycle}: mu = {mu}, p = {p}")]
    NonFinitePolicy { cycle: usize, mu: f64, p: f64 },

    #[error("queue is unstable: rho = {rho}")]
    Unstable { rho: f64 },

    #[error("optimizer converged onto the stability boundary (rho = {rho})")]
    StabilityBoundary { rho: f64 },

    #[error("decomposition requires oracle")]
    OracleRequired,

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than by a run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
