//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide error enumeration.
///
/// Numerical non-convergence is generally reported through result flags
/// rather than errors, so that best-so-far values stay available; the
/// variants here are conditions under which no meaningful value exists.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown state label `{0}`")]
    UnknownState(String),

    #[error("unknown identifier `{0}` (not a state label or parameter)")]
    UnknownIdentifier(String),

    #[error("transition graph is not irreducible (strong connectivity fails)")]
    NotIrreducible,

    #[error("rate for edge {edge} out of bounds at point {point}: value {value}")]
    RateOutOfBounds {
        edge: String,
        point: String,
        value: f64,
    },

    #[error("model is invalid: {0}")]
    InvalidModel(String),

    #[error("enumeration cap exceeded: {requested} > {cap}")]
    CapExceeded { requested: u64, cap: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration step left the simplex at t={t} (violation {violation:.3e})")]
    StepRejected { t: f64, violation: f64 },

    #[error("trajectory failed to settle; a limit cycle is suspected (start {start})")]
    LimitCycleSuspected { start: usize },

    #[error("point could not be resolved to a basin within the time cap")]
    Unresolved,

    #[error("action is infinite: {0}")]
    InfiniteAction(String),

    #[error("target is unreachable{0}")]
    Unreachable(String),

    #[error("all candidate graphs have infinite cost")]
    AllInfinite,

    #[error(
        "the two Λ computations disagree beyond tolerance: graph {graph} vs hierarchy {hierarchy}"
    )]
    LambdaDisagreement { graph: f64, hierarchy: f64 },

    #[error("generator is not reversible (detailed-balance residual {residual:.3e})")]
    NotReversible { residual: f64 },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("all {0} replicas were censored at t_max")]
    AllCensored(usize),

    #[error("optimisation failed to converge: {0}")]
    NonConvergent(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
