//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A template spec or other domain value violates its invariants.
    #[error("domain error: {0}")]
    Domain(String),

    /// No template of the requested half-budget reaches the target horizon.
    #[error("horizon {horizon} is not reachable with half-budget k={k}")]
    UnreachableHorizon { horizon: i64, k: usize },

    /// The greedy planner ran out of admissible candidates.
    #[error("planning failed: no admissible call covers future steps {uncovered:?}")]
    PlanningFailed { uncovered: Vec<i64> },

    /// A scheme is structurally unusable (not a property violation report).
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The reverse-SDE integrator produced a non-finite value.
    #[error("sampler diverged at integration step {step}")]
    SamplerDiverged { step: usize },

    /// A conditioning index was not available when an action executed.
    #[error("action {action}: conditioning index {index} is not available")]
    UnavailableIndex { action: usize, index: i64 },

    #[error("configuration error: {0}")]
    Config(String),

    /// A binary artifact failed structural validation.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
