use thiserror::Error;

use crate::quad::QuadError;

#[derive(Debug, Error)]
pub enum HamError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("{context}: {source}")]
    Quadrature {
        context: &'static str,
        #[source]
        source: QuadError,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HamError {
    /// Model or input rejection, as opposed to a numerical breakdown.
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            HamError::InvalidParameter(_) | HamError::Unsupported(_) | HamError::Refused(_)
        )
    }

    pub fn quad(context: &'static str) -> impl FnOnce(QuadError) -> HamError {
        move |source| HamError::Quadrature { context, source }
    }
}

pub type Result<T> = std::result::Result<T, HamError>;
