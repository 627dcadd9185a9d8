use thiserror::Error;

use crate::frontend::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("exponent in `{0}` must be a non-negative integer")]
    BadExponent(String),
    #[error("exponent in `{0}` is too large")]
    ExponentTooLarge(String),
    #[error("`inf` reaches an operation that cannot absorb it: `{0}`")]
    InfinityMisuse(String),
    #[error("0 * inf is undefined in `{0}`")]
    ZeroTimesInf(String),
    #[error("bounds of `{0}` must be integers")]
    NonIntegerBound(String),
    #[error("series `{expr}` did not settle within {terms} terms")]
    SeriesUndetermined { expr: String, terms: usize },
    #[error("series `{0}` diverges to -inf")]
    SeriesNegativeDivergence(String),
    #[error("guard `{guard}` evaluates to {value} at {state}, outside [0, 1]")]
    GuardOutOfRange {
        guard: String,
        state: String,
        value: String,
    },
    #[error("assignment `{var} := {expr}` yields non-integer {value} at {state}")]
    NonInteger {
        var: String,
        expr: String,
        value: String,
        state: String,
    },
    #[error("expectation takes negative value {value} at {state}")]
    NegativeExpectation { state: String, value: String },
    #[error("witness {witness} does not bound |{first}| at {state}")]
    WitnessViolation {
        state: String,
        first: String,
        witness: String,
    },
    #[error("the first component may not mention `inf` or infinite series")]
    InfiniteFirst,
    #[error("a loop-free program is required here")]
    LoopNotAllowed,
    #[error("limit undetected: {0}")]
    LimitUndetected(String),
    #[error("supremum of an empty family")]
    EmptySup,
    #[error("supremum undetected at {state}: H_n did not stabilise within {steps} steps")]
    SupUndetected { state: String, steps: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Either a syntax error or an evaluation error.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type EvalResult<T> = Result<T, EvalError>;
