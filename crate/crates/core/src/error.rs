use thiserror::Error;

/// Errors produced by the models and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a documented precondition or the result would be unphysical.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical routine (quadrature, optimizer, root finder) failed.
    #[error("numeric error in {routine}: {message}")]
    Numeric { routine: &'static str, message: String },

    /// A least-squares fit did not converge; carries the last iterate.
    #[error("fit did not converge after {iterations} iterations (last estimate {last_estimate})")]
    Fit { iterations: usize, last_estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(routine: &'static str, msg: impl Into<String>) -> Self {
        Error::Numeric {
            routine,
            message: msg.into(),
        }
    }
}

/// Returns a domain error unless `cond` holds.
pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}
