//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor rejected a parameter.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A dependence model violated one of its structural constraints
    /// (e.g. a non-positive h value or a conditional probability outside [0,1]).
    #[error("invalid dependence model: {0}")]
    ModelInvalid(String),

    /// Adaptive quadrature exhausted its refinement budget. Carries the
    /// partial value and the error bound reached so far.
    #[error("quadrature did not converge: partial value {partial:e}, error bound {bound:e}")]
    QuadratureNonConvergence { partial: f64, bound: f64 },

    /// A rejection sampler exceeded its attempt budget, which signals an
    /// invalid kernel envelope rather than bad luck.
    #[error("rejection sampler stuck after {attempts} attempts")]
    SamplerStuck { attempts: u64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
