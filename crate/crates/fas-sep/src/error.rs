use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FasError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("numeric inconsistency: {0}")]
    NumericInconsistency(String),

    #[error("series truncation failed: tail bound {tail_bound:e} exceeds tolerance {tol:e} at p = {p_max} (partial value {partial:e})")]
    Truncation {
        partial: f64,
        tail_bound: f64,
        tol: f64,
        p_max: usize,
    },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    QuadratureNonConvergence { estimate: f64, error: f64 },
}

impl FasError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        FasError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FasError>;
