//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the solver, its engines and the verifier.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The input is malformed or outside the supported range.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The operation needs `k = p^τ (p − 1)`.
    #[error("context not applicable: k is not of the form p^tau (p-1)")]
    ContextNotApplicable,
    /// A stated precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    /// The operation does not apply to this input (the caller falls back).
    #[error("not applicable: {0}")]
    NotApplicable(String),
    /// A transform step is malformed (zero multiplier, zero scale, ...).
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    /// The enumeration budget ran out before the search completed.
    #[error("budget exceeded after {0} states")]
    BudgetExceeded(u64),
    /// A contraction rule failed to deliver its proven niveau or parity gain.
    #[error("contraction rule violated: {0}")]
    RuleViolation(String),
    /// The `k = 4` type-B schedule must switch to the cycling transform.
    #[error("needs cycling")]
    NeedsCycling,
    /// An internal invariant failed; this signals a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
