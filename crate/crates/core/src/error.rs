use thiserror::Error;

/// Errors raised by the allocation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("rates must be pairwise distinct (got {0:?})")]
    DistinctRatesRequired(Vec<f64>),

    #[error("riskiest branch is not unique")]
    TiedRiskiestBranch,

    #[error("parameters too close to a singular denominator: {0}")]
    SingularParameters(String),

    #[error("no sign change on [{lo}, {hi}] (f(lo)={f_lo}, f(hi)={f_hi})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("no convergence after {iterations} iterations (residual norm {residual_norm:e})")]
    Convergence {
        iterations: usize,
        last_iterate: Vec<f64>,
        residual_norm: f64,
    },

    #[error("closed forms require the absolute-value penalty")]
    UnsupportedPenalty,

    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
