use thiserror::Error;

/// Errors surfaced by model parsing, encoding and the solving pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("equation of `{0}` references itself")]
    SelfReference(String),
    #[error("cyclic dependency: {}", .0.join(" -> "))]
    CyclicModel(Vec<String>),
    #[error("unbound variable `{0}` in expression")]
    UnboundVariable(String),
    #[error("context must assign exactly the exogenous variables: {0}")]
    ContextNotTotal(String),
    #[error("intervention target `{0}` is not endogenous")]
    InterventionNotEndogenous(String),
    #[error("cause variable `{0}` also occurs in the effect")]
    CauseEffectOverlap(String),
    #[error("cause variable `{0}` is not endogenous")]
    CauseNotEndogenous(String),
    #[error("effect references non-endogenous variable `{0}`")]
    EffectNotEndogenous(String),
    #[error("AC1 violation: `{0}` does not carry its actual value in the candidate cause")]
    Ac1Violation(String),
    #[error("empty candidate cause")]
    EmptyCause,
    #[error("duplicate cause variable `{0}`")]
    DuplicateCauseVariable(String),
    #[error("solver index {0} maps to no model variable")]
    UnregisteredIndex(u32),
    #[error("model enumeration exceeded the cap of {0}")]
    EnumerationLimitExceeded(usize),
    #[error("no candidate variables outside the effect")]
    NoCandidateVariables,
    #[error("effect does not hold in the actual evaluation")]
    EffectNotActual,
    #[error("candidate is not an actual cause")]
    NotACause,
    #[error("model too large for exact responsibility ({0} endogenous, cap {1})")]
    ModelTooLargeForExactDr(usize, usize),
    #[error("model exceeds the oracle cap ({0} endogenous, cap {1})")]
    CapExceeded(usize, usize),
    #[error("effect never holds under sampled contexts ({0} retries)")]
    EffectNeverHolds(usize),
    #[error("deadline exceeded")]
    Timeout,
}

pub type Result<T> = std::result::Result<T, Error>;
