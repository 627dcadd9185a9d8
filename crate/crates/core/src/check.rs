//! Shared machinery for grid-based inductive checks.

use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::domain::{eval_expr, eval_guard, rat_from_f64, ConvergencePolicy, State, Value};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{Expr, ProbGuard, Program};

/// One inequality `lhs <= rhs` checked at one grid state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub condition: String,
    pub state: State,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub lhs: String,
    pub rhs: String,
    pub ok: bool,
}

/// Verdict for one named condition across the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub pass: bool,
    pub checked: usize,
    pub failures: usize,
    /// Comparisons allowed a slack of the invariant tolerance because a side
    /// involves an infinite series; otherwise they were exact.
    pub tolerant: bool,
}

pub(crate) fn summarise(name: &str, rows: &[CheckRow], tolerant: bool) -> ConditionSummary {
    let mine: Vec<_> = rows.iter().filter(|r| r.condition == name).collect();
    ConditionSummary {
        condition: name.to_string(),
        pass: mine.iter().all(|r| r.ok),
        checked: mine.len(),
        failures: mine.iter().filter(|r| !r.ok).count(),
        tolerant,
    }
}

/// Slack allowed when comparing expressions: `tol` when a series is
/// involved, zero otherwise.
pub(crate) fn margin(tol: f64, exprs: &[&Expr]) -> BigRational {
    if exprs.iter().any(|e| e.has_infinite_series()) {
        rat_from_f64(tol)
    } else {
        BigRational::zero()
    }
}

pub(crate) fn leq_within(lhs: &Value, rhs: &Value, margin: &BigRational) -> bool {
    match (lhs, rhs) {
        (_, Value::Inf) => true,
        (Value::Inf, Value::Finite(_)) => false,
        (Value::Finite(a), Value::Finite(b)) => *a <= b + margin,
    }
}

/// `Φ_h(X)(σ) = (1 - ξ(σ)) h(σ) + ξ(σ) wp(body, X)(σ)`, with `wp(body, X)`
/// supplied already transformed. Zero-weight terms are not evaluated.
pub(crate) fn phi(
    guard: &ProbGuard,
    h: &Expr,
    body_wp: Option<&Expr>,
    s: &State,
    policy: &ConvergencePolicy,
    margin: &BigRational,
) -> EvalResult<Value> {
    let p = eval_guard(guard, s, policy)?;
    let q = BigRational::one() - &p;
    let mut acc = Value::Finite(BigRational::zero());
    if q.is_positive() {
        acc = add(acc, scale(nonneg(eval_expr(h, s, policy)?, s, margin)?, &q));
    }
    if p.is_positive() {
        if let Some(w) = body_wp {
            acc = add(acc, scale(nonneg(eval_expr(w, s, policy)?, s, margin)?, &p));
        }
    }
    Ok(acc)
}

/// Rejects values below `-margin`; values within the margin are kept as
/// they are, since series evaluation may undershoot an exact zero.
pub(crate) fn nonneg(v: Value, s: &State, margin: &BigRational) -> EvalResult<Value> {
    match &v {
        Value::Finite(r) if *r < -margin.clone() => Err(EvalError::NegativeExpectation {
            state: s.to_string(),
            value: r.to_string(),
        }),
        _ => Ok(v),
    }
}

fn add(a: Value, b: Value) -> Value {
    match (a, b) {
        (Value::Finite(x), Value::Finite(y)) => Value::Finite(x + y),
        _ => Value::Inf,
    }
}

fn scale(v: Value, p: &BigRational) -> Value {
    match v {
        Value::Finite(x) => Value::Finite(x * p),
        Value::Inf => Value::Inf,
    }
}

/// Exact output distribution of a loop-free prefix.
pub(crate) fn prefix_outcomes(
    prefix: &Program,
    s: &State,
    policy: &ConvergencePolicy,
) -> EvalResult<Vec<(State, BigRational)>> {
    if !prefix.is_loop_free() {
        return Err(EvalError::LoopNotAllowed);
    }
    let d = crate::oracle::enumerate_from(prefix, s, usize::MAX, policy)?;
    Ok(d.terminal.into_iter().map(|m| (m.state, m.mass)).collect())
}

/// Membership of `t`, restricted to the grid's variables, in the grid.
pub(crate) struct GridIndex {
    vars: Vec<String>,
    states: HashSet<State>,
}

impl GridIndex {
    pub fn new(grid: &[State]) -> Self {
        GridIndex {
            vars: grid
                .first()
                .map(|s| s.iter().map(|(k, _)| k.clone()).collect())
                .unwrap_or_default(),
            states: grid.iter().cloned().collect(),
        }
    }

    pub fn covers(&self, t: &State) -> bool {
        let mut r = State::new();
        for v in &self.vars {
            match t.get(v) {
                Some(x) => r.insert(v, x.clone()),
                None => return false,
            }
        }
        self.states.contains(&r)
    }
}
