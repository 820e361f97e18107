use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate output state: normalization constant {z:e} is at or below the floor")]
    Degenerate { z: f64 },

    #[error("no normal rows available for training")]
    EmptyTraining,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("non-finite gradient at {which}[{index}]")]
    NonFiniteGradient { which: &'static str, index: usize },

    #[error("empty cohort: {0}")]
    EmptyCohort(&'static str),

    #[error("no feature reaches amplification threshold {threshold}")]
    EmptySelection { threshold: f64 },

    #[error("dense state limited to {max} sites, got {sites}")]
    TooManySites { sites: usize, max: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
