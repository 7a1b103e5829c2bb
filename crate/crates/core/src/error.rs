use thiserror::Error;

/// Errors raised by the bound calculators and the sampling engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input: wrong shape, asymmetric matrix, non-finite entry.
    #[error("invalid input: {0}")]
    Validation(String),

    /// Input outside the mathematical domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The moment generating function diverges at the requested argument.
    #[error("moment generating function diverges: {0}")]
    DivergentMgf(String),

    /// A bound parameter equation has no admissible solution.
    #[error("infeasible: {condition}: {detail}")]
    Infeasible {
        condition: &'static str,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn infeasible(condition: &'static str, detail: impl Into<String>) -> Self {
        Error::Infeasible {
            condition,
            detail: detail.into(),
        }
    }

    /// Name of the violated condition for `Infeasible`, `None` otherwise.
    pub fn failed_condition(&self) -> Option<&'static str> {
        match self {
            Error::Infeasible { condition, .. } => Some(condition),
            _ => None,
        }
    }
}
