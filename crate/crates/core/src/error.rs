use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, HimmError>;

#[derive(Debug, Error)]
pub enum HimmError {
    /// A matrix or sequence does not have the size implied by the model shape.
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    Dimension { field: String, expected: String, found: String },

    #[error("parameter set violates model invariants:\n{0}")]
    Invalid(ValidationReport),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The observation at slot `t` (0-based) has zero probability under every
    /// reachable hidden state.
    #[error("degenerate evidence at slot {t}: observation impossible under the model")]
    DegenerateEvidence { t: usize },

    #[error("observation sequence is too short: need at least {needed} slots, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("all {0} EM starts failed")]
    AllStartsFailed(usize, #[source] Box<HimmError>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HimmError {
    pub(crate) fn dim(field: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        HimmError::Dimension { field: field.into(), expected: expected.to_string(), found: found.to_string() }
    }

    /// True for errors caused by numerically impossible data rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            HimmError::DegenerateEvidence { .. } => true,
            HimmError::AllStartsFailed(_, inner) => inner.is_numerical(),
            _ => false,
        }
    }
}
