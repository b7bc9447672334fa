use thiserror::Error;

/// Errors raised by the distribution, loss, allocation, deployment and
/// simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("survival underflow at t = {t}")]
    SurvivalUnderflow { t: f64 },

    #[error("{family} is not absolutely continuous; density and hazard are undefined")]
    NotAbsolutelyContinuous { family: &'static str },

    #[error("loss curve is singular at the origin")]
    SingularAtOrigin,

    #[error("loss curve has a kink at x = {x}; derivative undefined")]
    Kink { x: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("no bracket found for {0}")]
    NoBracket(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error in `{input}`: {message}")]
    Parse { input: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(input: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SurvivalUnderflow { .. } => "survival_underflow",
            Error::NotAbsolutelyContinuous { .. } => "not_absolutely_continuous",
            Error::SingularAtOrigin => "singular_at_origin",
            Error::Kink { .. } => "kink",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NoBracket(_) => "no_bracket",
            Error::Unsupported(_) => "unsupported",
            Error::Parse { .. } => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
