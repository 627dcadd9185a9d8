//! Evaluation of expressions, guards and predicates at a state.
//!
//! Multiplication short-circuits on a zero left operand, so `p * e` with
//! `p = 0` never evaluates `e`. Branch weights are always placed on the left,
//! which keeps unreachable branches from raising errors or meeting `0 * inf`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::policy::{ConvergencePolicy, Increments};
use super::state::State;
use super::value::{to_f64, Value};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{rat_mod, Expr, Pred, ProbGuard};

const MAX_EXPONENT: u64 = 100_000;
const MAX_FINITE_TERMS: u64 = 1_000_000;

pub fn eval_expr(e: &Expr, state: &State, policy: &ConvergencePolicy) -> EvalResult<Value> {
    Env {
        state,
        locals: Vec::new(),
        policy,
    }
    .expr(e)
}

/// Evaluates an expression that must be finite.
pub fn eval_finite(e: &Expr, state: &State, policy: &ConvergencePolicy) -> EvalResult<BigRational> {
    match eval_expr(e, state, policy)? {
        Value::Finite(r) => Ok(r),
        Value::Inf => Err(EvalError::InfinityMisuse(e.to_string())),
    }
}

pub fn eval_pred(p: &Pred, state: &State, policy: &ConvergencePolicy) -> EvalResult<bool> {
    Env {
        state,
        locals: Vec::new(),
        policy,
    }
    .pred(p)
}

/// Value of a guard, checked to lie in `[0, 1]`.
pub fn eval_guard(
    g: &ProbGuard,
    state: &State,
    policy: &ConvergencePolicy,
) -> EvalResult<BigRational> {
    let v = eval_expr(g.expr(), state, policy)?;
    match v {
        Value::Finite(r) if !r.is_negative() && r <= BigRational::one() => Ok(r),
        other => Err(EvalError::GuardOutOfRange {
            guard: g.expr().to_string(),
            state: state.to_string(),
            value: other.to_string(),
        }),
    }
}

/// Value of an assignment right-hand side, which must be an integer.
pub fn eval_assignment(
    var: &str,
    e: &Expr,
    state: &State,
    policy: &ConvergencePolicy,
) -> EvalResult<BigInt> {
    let r = eval_finite(e, state, policy)?;
    if r.is_integer() {
        Ok(r.to_integer())
    } else {
        Err(EvalError::NonInteger {
            var: var.to_string(),
            expr: e.to_string(),
            value: r.to_string(),
            state: state.to_string(),
        })
    }
}

struct Env<'a> {
    state: &'a State,
    locals: Vec<(String, BigInt)>,
    policy: &'a ConvergencePolicy,
}

impl Env<'_> {
    fn lookup(&self, v: &str) -> EvalResult<BigRational> {
        if let Some((_, n)) = self.locals.iter().rev().find(|(k, _)| k == v) {
            return Ok(BigRational::from_integer(n.clone()));
        }
        self.state
            .get(v)
            .map(|n| BigRational::from_integer(n.clone()))
            .ok_or_else(|| EvalError::Unbound(v.to_string()))
    }

    fn finite(&mut self, e: &Expr) -> EvalResult<BigRational> {
        match self.expr(e)? {
            Value::Finite(r) => Ok(r),
            Value::Inf => Err(EvalError::InfinityMisuse(e.to_string())),
        }
    }

    fn integer(&mut self, e: &Expr, whole: &Expr) -> EvalResult<BigInt> {
        let r = self.finite(e)?;
        if r.is_integer() {
            Ok(r.to_integer())
        } else {
            Err(EvalError::NonIntegerBound(whole.to_string()))
        }
    }

    fn expr(&mut self, e: &Expr) -> EvalResult<Value> {
        use Value::{Finite, Inf};
        let misuse = || EvalError::InfinityMisuse(e.to_string());
        Ok(match e {
            Expr::Const(c) => Finite(c.clone()),
            Expr::Var(v) => Finite(self.lookup(v)?),
            Expr::Inf => Inf,
            Expr::Neg(a) => match self.expr(a)? {
                Finite(x) => Finite(-x),
                Inf => return Err(misuse()),
            },
            Expr::Add(a, b) => match (self.expr(a)?, self.expr(b)?) {
                (Finite(x), Finite(y)) => Finite(x + y),
                _ => Inf,
            },
            Expr::Sub(a, b) => match (self.expr(a)?, self.expr(b)?) {
                (Finite(x), Finite(y)) => Finite(x - y),
                (Inf, Finite(_)) => Inf,
                _ => return Err(misuse()),
            },
            Expr::Mul(a, b) => {
                let x = self.expr(a)?;
                if matches!(&x, Finite(z) if z.is_zero()) {
                    return Ok(x);
                }
                match (x, self.expr(b)?) {
                    (Finite(x), Finite(y)) => Finite(x * y),
                    (Finite(x), Inf) | (Inf, Finite(x)) => {
                        if x.is_zero() {
                            return Err(EvalError::ZeroTimesInf(e.to_string()));
                        }
                        if x.is_negative() {
                            return Err(misuse());
                        }
                        Inf
                    }
                    (Inf, Inf) => Inf,
                }
            }
            Expr::Div(a, b) => match (self.expr(a)?, self.expr(b)?) {
                (_, Finite(y)) if y.is_zero() => {
                    return Err(EvalError::DivisionByZero(e.to_string()))
                }
                (Finite(x), Finite(y)) => Finite(x / y),
                (Inf, Finite(y)) if y.is_positive() => Inf,
                _ => return Err(misuse()),
            },
            Expr::Mod(a, b) => {
                let x = self.finite(a)?;
                let y = self.finite(b)?;
                if y.is_zero() {
                    return Err(EvalError::DivisionByZero(e.to_string()));
                }
                Finite(rat_mod(&x, &y))
            }
            Expr::Pow(a, b) => {
                let base = self.finite(a)?;
                let exp = self.finite(b)?;
                if !exp.is_integer() || exp.is_negative() {
                    return Err(EvalError::BadExponent(e.to_string()));
                }
                let n = exp
                    .to_integer()
                    .to_u64()
                    .filter(|&n| n <= MAX_EXPONENT)
                    .ok_or_else(|| EvalError::ExponentTooLarge(e.to_string()))?;
                Finite(pow(&base, n))
            }
            Expr::Abs(a) => match self.expr(a)? {
                Finite(x) => Finite(x.abs()),
                Inf => Inf,
            },
            Expr::Sign(a) => match self.expr(a)? {
                Finite(x) => Finite(x.signum()),
                Inf => Finite(BigRational::one()),
            },
            Expr::Min(a, b) => self.expr(a)?.min(self.expr(b)?),
            Expr::Max(a, b) => self.expr(a)?.max(self.expr(b)?),
            Expr::Indicator(p) => {
                if self.pred(p)? {
                    Finite(BigRational::one())
                } else {
                    Finite(BigRational::zero())
                }
            }
            Expr::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                let lo_v = self.integer(lo, e)?;
                match hi {
                    Some(hi) => {
                        let hi_v = self.integer(hi, e)?;
                        self.finite_sum(index, lo_v, hi_v, body, e)?
                    }
                    None => self.series(index, lo_v, body, e)?,
                }
            }
        })
    }

    fn with_index<T>(
        &mut self,
        index: &str,
        i: BigInt,
        f: impl FnOnce(&mut Self) -> EvalResult<T>,
    ) -> EvalResult<T> {
        self.locals.push((index.to_string(), i));
        let out = f(self);
        self.locals.pop();
        out
    }

    fn finite_sum(
        &mut self,
        index: &str,
        lo: BigInt,
        hi: BigInt,
        body: &Expr,
        whole: &Expr,
    ) -> EvalResult<Value> {
        if hi < lo {
            return Ok(Value::Finite(BigRational::zero()));
        }
        let count = (&hi - &lo).to_u64().unwrap_or(u64::MAX);
        if count >= MAX_FINITE_TERMS {
            return Err(EvalError::SeriesUndetermined {
                expr: whole.to_string(),
                terms: MAX_FINITE_TERMS as usize,
            });
        }
        let mut acc = BigRational::zero();
        let mut i = lo;
        while i <= hi {
            match self.with_index(index, i.clone(), |env| env.expr(body))? {
                Value::Finite(t) => acc += t,
                Value::Inf => return Ok(Value::Inf),
            }
            i += 1;
        }
        Ok(Value::Finite(acc))
    }

    fn series(&mut self, index: &str, lo: BigInt, body: &Expr, whole: &Expr) -> EvalResult<Value> {
        let policy = self.policy;
        let mut acc = BigRational::zero();
        let mut incs = Increments::new(policy.window);
        let mut i = lo;
        for _ in 0..policy.max_steps {
            let term = match self.with_index(index, i.clone(), |env| env.expr(body))? {
                Value::Finite(t) => t,
                Value::Inf => return Ok(Value::Inf),
            };
            acc += &term;
            incs.push(term);
            i += 1;
            let s = to_f64(&acc);
            if s > policy.threshold {
                return Ok(Value::Inf);
            }
            if s < -policy.threshold {
                return Err(EvalError::SeriesNegativeDivergence(whole.to_string()));
            }
            if incs.settled(policy.tol) {
                return Ok(Value::Finite(acc));
            }
            match incs.growing() {
                Some(true) => return Ok(Value::Inf),
                Some(false) => return Err(EvalError::SeriesNegativeDivergence(whole.to_string())),
                None => {}
            }
        }
        Err(EvalError::SeriesUndetermined {
            expr: whole.to_string(),
            terms: policy.max_steps,
        })
    }

    fn pred(&mut self, p: &Pred) -> EvalResult<bool> {
        Ok(match p {
            Pred::Bool(b) => *b,
            Pred::Cmp(op, a, b) => {
                let x = self.expr(a)?;
                let y = self.expr(b)?;
                op.holds(&x, &y)
            }
            Pred::Not(q) => !self.pred(q)?,
            Pred::And(a, b) => self.pred(a)? && self.pred(b)?,
            Pred::Or(a, b) => self.pred(a)? || self.pred(b)?,
        })
    }
}

fn pow(base: &BigRational, n: u64) -> BigRational {
    let numer = num_traits::pow(base.numer().clone(), n as usize);
    let denom = num_traits::pow(base.denom().clone(), n as usize);
    BigRational::new(numer, denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::value::q;
    use crate::frontend::{parse_expression, Expr};

    fn ev(src: &str, s: &State) -> EvalResult<Value> {
        eval_expr(
            &parse_expression(src).unwrap(),
            s,
            &ConvergencePolicy::series(),
        )
    }

    fn close(v: &Value, target: f64, tol: f64) -> bool {
        (v.to_f64() - target).abs() < tol
    }

    #[test]
    fn arithmetic_and_builtins() {
        let s = State::from_pairs([("x", -3), ("y", 2)]);
        assert_eq!(ev("x + 3/4", &s).unwrap(), Value::Finite(q(-9, 4)));
        assert_eq!(ev("abs(x) * sign(x)", &s).unwrap(), Value::Finite(q(-3, 1)));
        assert_eq!(ev("x mod 2", &s).unwrap(), Value::Finite(q(1, 1)));
        assert_eq!(ev("(-2)^y", &s).unwrap(), Value::Finite(q(4, 1)));
        assert_eq!(
            ev("min(x, y) + max(x, y)", &s).unwrap(),
            Value::Finite(q(-1, 1))
        );
        assert_eq!(ev("[x < 0 and y = 2]", &s).unwrap(), Value::Finite(q(1, 1)));
    }

    #[test]
    fn errors() {
        let s = State::from_pairs([("x", 0)]);
        assert!(matches!(ev("1 / x", &s), Err(EvalError::DivisionByZero(_))));
        assert!(matches!(
            ev("2^(x - 1)", &s),
            Err(EvalError::BadExponent(_))
        ));
        assert!(matches!(ev("y", &s), Err(EvalError::Unbound(_))));
        assert!(matches!(ev("inf * x", &s), Err(EvalError::ZeroTimesInf(_))));
        assert!(matches!(ev("-inf", &s), Err(EvalError::InfinityMisuse(_))));
    }

    #[test]
    fn left_zero_short_circuits() {
        let s = State::from_pairs([("x", 0)]);
        assert_eq!(
            ev("[x != 0] * (1 / x)", &s).unwrap(),
            Value::Finite(q(0, 1))
        );
        assert_eq!(
            ev("[x > 2] * inf + abs(x)", &s).unwrap(),
            Value::Finite(q(0, 1))
        );
        assert_eq!(ev("[x < 2] * inf + abs(x)", &s).unwrap(), Value::Inf);
    }

    #[test]
    fn geometric_series() {
        // sum_i |F - 3i| / 2^(i+1) at F = 0 and F = 1 both equal 3.
        for f in [0, 1] {
            let s = State::from_pairs([("F", f)]);
            let v = ev("sum(i, 0, inf, abs(F - 3*i) / 2^(i+1))", &s).unwrap();
            assert!(close(&v, 3.0, 1e-10), "{v}");
        }
    }

    #[test]
    fn constant_terms_diverge() {
        let s = State::from_pairs([("x", 1)]);
        assert_eq!(
            ev("sum(i, 0, inf, 2^(x+i) / 2^(i+1))", &s).unwrap(),
            Value::Inf
        );
        assert!(matches!(
            ev("sum(i, 0, inf, -1)", &s),
            Err(EvalError::SeriesNegativeDivergence(_))
        ));
    }

    #[test]
    fn slow_series_reports_undetermined() {
        let s = State::new();
        let policy = ConvergencePolicy {
            max_steps: 500,
            ..ConvergencePolicy::series()
        };
        let e = parse_expression("sum(i, 1, inf, 1 / i^2)").unwrap();
        assert!(matches!(
            eval_expr(&e, &s, &policy),
            Err(EvalError::SeriesUndetermined { .. })
        ));
    }

    #[test]
    fn finite_sums_and_shadowing() {
        let s = State::from_pairs([("i", 10), ("n", 3)]);
        assert_eq!(
            ev("i + sum(i, 0, n, i)", &s).unwrap(),
            Value::Finite(q(16, 1))
        );
        assert_eq!(ev("sum(i, 5, 2, i)", &s).unwrap(), Value::Finite(q(0, 1)));
    }

    #[test]
    fn guard_range_checked() {
        let s = State::from_pairs([("x", 4)]);
        let g = ProbGuard::new(parse_expression("2/3*[x mod 2 = 0] + 1/3*[x mod 2 = 1]").unwrap());
        assert_eq!(
            eval_guard(&g, &s, &ConvergencePolicy::series()).unwrap(),
            q(2, 3)
        );
        let bad = ProbGuard::new(Expr::var("x"));
        assert!(matches!(
            eval_guard(&bad, &s, &ConvergencePolicy::series()),
            Err(EvalError::GuardOutOfRange { .. })
        ));
    }
}
