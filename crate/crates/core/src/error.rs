use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("matrix `{name}` is not symmetric (max asymmetry {gap:e})")]
    NotSymmetric { name: String, gap: f64 },

    #[error("{what} is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { what: String, min_eig: f64 },

    #[error("{what} is materially indefinite (min eigenvalue {min_eig:e})")]
    Indefinite { what: String, min_eig: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("singular linear system in {what} (sigma_min {sigma_min:e})")]
    Singular { what: String, sigma_min: f64 },

    #[error("interiority violated: {what} (min eigenvalue {min_eig:e})")]
    Interiority { what: String, min_eig: f64 },

    #[error("line search collapsed in {what} (step {step:e})")]
    LineSearch { what: String, step: f64 },

    #[error("feasibility phase failed: ||h(x)|| = {residual:e}")]
    Feasibility { residual: f64 },

    #[error("rank-deficient constraint Jacobian (sigma_min {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("inconsistent system in {what} (residual {residual:e})")]
    Inconsistent { what: String, residual: f64 },

    #[error("no valid Lagrange multiplier supplied (best stationarity residual {residual:e})")]
    NoValidMultiplier { residual: f64 },

    #[error("no interior point of the multiplier set was found (best min eigenvalue {min_eig:e})")]
    NoInteriorMultiplier { min_eig: f64 },

    #[error("solution set of the limiting tangent system appears empty (residual {residual:e})")]
    EmptyLimitSystem { residual: f64 },

    #[error("unknown instance `{name}`; registry: {}", registry.join(", "))]
    UnknownInstance { name: String, registry: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("at mu = {mu:e}: {source}")]
    AtMu {
        mu: f64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn at_mu(self, mu: f64) -> Self {
        Error::AtMu {
            mu,
            source: alloc::boxed::Box::new(self),
        }
    }
}

use alloc::string::ToString;
