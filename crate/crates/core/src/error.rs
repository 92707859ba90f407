use thiserror::Error;

/// Errors surfaced by the engine.
///
/// `InsufficientPrecision` is retryable: recompute with a larger `n_p` or
/// `n_u` and the answer stabilizes. `InternalConsistency` flags a violation
/// of a fact that is a theorem for every input, so it always indicates a
/// bug (or precision loss that escaped the guards).
#[derive(Debug, Error)]
pub enum Error {
    #[error("precision mismatch: {0}")]
    PrecMismatch(String),

    #[error("insufficient precision: {0}; retry with larger n_p/n_u")]
    InsufficientPrecision(String),

    #[error("inexact division: {0}")]
    InexactDivision(String),

    #[error("not an effective isogeny: no height h <= {h_max} admits a witness")]
    NotEffective { h_max: u32 },

    #[error("submodule containment violated: {0}")]
    NotContained(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("missing Hodge-Tate weights: {0}")]
    MissingWeights(String),

    #[error("assertion refuted or bug: {0}")]
    AssertionRefuted(String),

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
