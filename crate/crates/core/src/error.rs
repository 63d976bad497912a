use thiserror::Error;

use crate::weights::WeightViolation;

/// Which hypothesis of a discrimination-information comparison failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Alternative,
    Null,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Alternative => f.write_str("alternative"),
            Side::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("statistic {t} lies outside the support of the family")]
    OutOfSupport { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("expectation diverges for df = {df}")]
    DivergentExpectation { df: f64 },

    #[error("pooled variance is zero")]
    DegenerateVariance,

    #[error("at least {required} comparisons are required, got {got}")]
    InvalidArity { required: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),

    #[error("operation requires the normal known-scale family")]
    WrongFamily,

    #[error("normalizing integral diverges (window half-width reached {window:e})")]
    DivergentComplexity { window: f64 },

    #[error("equal weight conditions violated: {0}")]
    EqualWeightViolation(String),

    #[error("weight row rejected: {0:?}")]
    InvalidWeights(Vec<WeightViolation>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{side} hypothesis: {source}")]
    Hypothesis {
        side: Side,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn on_side(self, side: Side) -> Self {
        Error::Hypothesis { side, source: Box::new(self) }
    }

    /// The innermost error, with any hypothesis tag stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Hypothesis { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
