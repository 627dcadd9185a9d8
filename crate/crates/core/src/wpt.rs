//! The integrability-witnessing transformer on pairs `(f, g)` with `|f| <= g`.
//!
//! A loop's value is the limit of its iterates. Writing `Φ_h` for the
//! characteristic functional with post `h`, the `n`-th mixed iterate is
//! `(Φⁿ_{|f|+f}(0) - Φⁿ_{|f|}(0), Φⁿ_g(0))`, so every loop reduces to three
//! non-negative iterations ([`char_triple_iterate`]). [`mixed_iterate`]
//! computes the same iterate directly with pair arithmetic.

use std::fmt;

use num_traits::Signed;
use serde::Serialize;

use crate::domain::{
    eval_expr, eval_finite, EvalOptions, ExtNonNeg, IwValue, Outcome, State, Value,
};
use crate::engine::{decompose, Backward, Engine, Multi, Semiring};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{fold_constants, substitute, Expr, ProbGuard, Program};
use crate::wp::branch;

/// A pair of expressions denoting an integrability-witnessing expectation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IwPairExpr {
    pub first: Expr,
    pub witness: Expr,
}

impl IwPairExpr {
    /// The first component must be finite everywhere, so it may not mention
    /// `inf` or an infinite series.
    pub fn new(first: Expr, witness: Expr) -> EvalResult<Self> {
        if first.has_infinity() || first.has_infinite_series() {
            return Err(EvalError::InfiniteFirst);
        }
        Ok(IwPairExpr { first, witness })
    }

    /// `(f, |f|)`, the pair asking for the plain expected value of `f`.
    pub fn with_abs_witness(first: Expr) -> EvalResult<Self> {
        let witness = Expr::abs(first.clone());
        Self::new(first, witness)
    }

    /// Canonical value at `s`. Where the witness is infinite the first
    /// component is not evaluated at all.
    pub fn eval(&self, s: &State, opts: &EvalOptions) -> EvalResult<IwValue> {
        let g = match eval_expr(&self.witness, s, &opts.series)? {
            Value::Inf => return Ok(IwValue::diverged()),
            Value::Finite(g) => g,
        };
        let f = eval_finite(&self.first, s, &opts.series)?;
        if f.abs() > g {
            return Err(EvalError::WitnessViolation {
                state: s.to_string(),
                first: f.to_string(),
                witness: g.to_string(),
            });
        }
        Ok(IwValue::of(f, ExtNonNeg::Finite(g)))
    }

    fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        IwPairExpr {
            first: f(&self.first),
            witness: f(&self.witness),
        }
    }
}

impl fmt::Display for IwPairExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.witness)
    }
}

/// `w̃p(C, (f, g))` as a pair of expressions, for loop-free `C`.
pub fn wpt_symbolic(prog: &Program, p: &IwPairExpr) -> EvalResult<IwPairExpr> {
    Ok(match prog {
        Program::Skip => p.clone(),
        Program::Assign(x, e) => p.map(|c| fold_constants(&substitute(c, x, e))),
        Program::Seq(a, b) => wpt_symbolic(a, &wpt_symbolic(b, p)?)?,
        Program::If(g, a, b) => {
            let (l, r) = (wpt_symbolic(a, p)?, wpt_symbolic(b, p)?);
            IwPairExpr {
                first: branch(g.expr(), l.first, r.first),
                witness: branch(g.expr(), l.witness, r.witness),
            }
        }
        Program::While(..) => return Err(EvalError::LoopNotAllowed),
    })
}

/// `(Φⁿ_{|f|+f}(0)(σ), Φⁿ_{|f|}(0)(σ), Φⁿ_g(0)(σ))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecompTriple {
    pub a: ExtNonNeg,
    pub b: ExtNonNeg,
    pub c: ExtNonNeg,
}

impl DecompTriple {
    /// The mixed iterate `(a - b, c)`, canonical.
    pub fn recompose(&self) -> IwValue {
        crate::engine::recompose(&self.a, &self.b, &self.c)
    }
}

impl fmt::Display for DecompTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

fn triple_post<'a>(
    p: &'a IwPairExpr,
    opts: &'a EvalOptions,
) -> impl Fn(&State) -> EvalResult<Multi> + 'a {
    move |t: &State| Ok(Multi(decompose(&p.eval(t, opts)?).to_vec()))
}

/// The decomposition triple after exactly `n` unfoldings of
/// `while (guard) { body }` from `σ`. Inner loops of `body` are resolved to
/// their limits first.
pub fn char_triple_iterate(
    guard: &ProbGuard,
    body: &Program,
    p: &IwPairExpr,
    s: &State,
    n: usize,
    opts: &EvalOptions,
) -> EvalResult<DecompTriple> {
    let engine = Engine::new(opts);
    let post = triple_post(p, opts);
    let v = engine.iterate_exact(guard, body, &post, s, n, 3)?;
    Ok(DecompTriple {
        a: v[0].clone(),
        b: v[1].clone(),
        c: v[2].clone(),
    })
}

/// The `n`-th mixed iterate `Φⁿ(⟦0, 0⟧)(σ)` by direct pair arithmetic:
/// backward unrolling with canonical pair sums and weighted scaling.
pub fn mixed_iterate(
    guard: &ProbGuard,
    body: &Program,
    p: &IwPairExpr,
    s: &State,
    n: usize,
    opts: &EvalOptions,
) -> EvalResult<IwValue> {
    let engine = Engine::new(opts);
    let it = Backward::new(&engine, guard, body, Box::new(|t: &State| p.eval(t, opts)));
    it.at(n, s)
}

/// `w̃p(while (guard) { body }, (f, g))(σ)`.
pub fn wpt_loop_value(
    guard: &ProbGuard,
    body: &Program,
    p: &IwPairExpr,
    s: &State,
    opts: &EvalOptions,
) -> EvalResult<Outcome<IwValue>> {
    let engine = Engine::new(opts);
    let value = IwValue::while_value(&engine, guard, body, &|t: &State| p.eval(t, opts), s)?;
    Ok(Outcome {
        value,
        convergence: engine.convergence(),
        traces: engine.take_traces(),
    })
}

/// `w̃p(C, (f, g))(σ)`, canonical.
pub fn wpt_value(
    prog: &Program,
    p: &IwPairExpr,
    s: &State,
    opts: &EvalOptions,
) -> EvalResult<Outcome<IwValue>> {
    let engine = Engine::new(opts);
    let value = engine.run(prog, &|t: &State| p.eval(t, opts), s)?;
    Ok(Outcome {
        value: value.canonical(),
        convergence: engine.convergence(),
        traces: engine.take_traces(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::domain::{q, qi, to_f64};
    use crate::frontend::parse_expression;

    fn e(src: &str) -> Expr {
        parse_expression(src).unwrap()
    }

    fn pair(f: &str, g: &str) -> IwPairExpr {
        IwPairExpr::new(e(f), e(g)).unwrap()
    }

    fn split(p: &Program) -> (&ProbGuard, &Program) {
        match p {
            Program::While(g, b) => (g, b),
            _ => panic!("not a loop"),
        }
    }

    fn x(v: i64) -> State {
        State::from_pairs([("x", v)])
    }

    #[test]
    fn pair_construction() {
        assert_eq!(
            IwPairExpr::new(e("inf"), e("inf")),
            Err(EvalError::InfiniteFirst)
        );
        assert_eq!(
            IwPairExpr::new(e("sum(i, 0, inf, 1/2^i)"), e("2")),
            Err(EvalError::InfiniteFirst)
        );
        let p = pair("x", "1");
        assert!(matches!(
            p.eval(&x(3), &EvalOptions::default()),
            Err(EvalError::WitnessViolation { .. })
        ));
        // The first component is never looked at under an infinite witness.
        let p = pair("1 / x", "[x = 0] * inf + [x != 0] * abs(1 / x)");
        assert_eq!(
            p.eval(&x(0), &EvalOptions::default()).unwrap(),
            IwValue::diverged()
        );
    }

    #[test]
    fn alttrunc_closed_form() {
        let prog = corpus::lookup("alttrunc").unwrap().program();
        let w = wpt_symbolic(&prog, &IwPairExpr::with_abs_witness(e("x")).unwrap()).unwrap();
        let opts = EvalOptions::default();
        for v in -5..=5 {
            let got = w.eval(&x(v), &opts).unwrap();
            let g = (qi(2) * qi(v.abs()) + qi((v + 1).abs()) + qi((v + 2).abs())) / qi(4);
            assert_eq!(
                got,
                IwValue::of(qi(v) / qi(2) + q(1, 4), ExtNonNeg::Finite(g))
            );
            assert_eq!(
                wpt_value(&prog, &w_post(), &x(v), &opts).unwrap().value,
                got
            );
        }
        let at3 = w.eval(&x(3), &opts).unwrap();
        assert_eq!(at3, IwValue::of(q(7, 4), ExtNonNeg::Finite(q(15, 4))));
    }

    fn w_post() -> IwPairExpr {
        IwPairExpr::with_abs_witness(e("x")).unwrap()
    }

    #[test]
    fn skip_is_identity() {
        let p = pair("-x", "abs(x)");
        assert_eq!(wpt_symbolic(&Program::Skip, &p).unwrap(), p);
        let v = wpt_value(&Program::Skip, &p, &x(2), &EvalOptions::default()).unwrap();
        assert_eq!(v.value, IwValue::of(qi(-2), ExtNonNeg::Finite(qi(2))));
    }

    #[test]
    fn triple_at_zero_and_amortized_witness() {
        let prog = corpus::lookup("amortized_op").unwrap().program();
        let stmts = prog.statements();
        let (g, body) = split(stmts[1]);
        let opts = EvalOptions::default();
        let s = State::from_pairs([("F", 0)]);
        let p = pair("F", "abs(F)");
        let t0 = char_triple_iterate(g, body, &p, &s, 0, &opts).unwrap();
        assert_eq!(t0.recompose(), IwValue::zero());
        let t = char_triple_iterate(g, body, &p, &s, 80, &opts).unwrap();
        assert!((t.c.to_f64() - 3.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn geo_witness_grows_linearly() {
        // At x = 1 the iterates of Φ_g with g = 2^x are exactly n.
        let prog = corpus::lookup("geo").unwrap().program();
        let stmts = prog.statements();
        let (g, body) = split(stmts[1]);
        let p = pair("pow(-2, x)", "2^x");
        let opts = EvalOptions::default();
        for n in 0..20 {
            let t = char_triple_iterate(g, body, &p, &x(1), n, &opts).unwrap();
            assert_eq!(t.c, ExtNonNeg::Finite(qi(n as i64)));
        }
    }

    #[test]
    fn geo_pathologies_are_non_integrable() {
        let prog = corpus::lookup("geo").unwrap().program();
        let opts = EvalOptions::default();
        for p in [pair("pow(-2, x)", "2^x"), pair("pow(-2, x) / x", "2^x / x")] {
            let out = wpt_value(&prog, &p, &x(0), &opts).unwrap();
            assert_eq!(out.value, IwValue::diverged());
            assert!(out.convergence.divergent);
            assert!(out.convergence.iterations <= 200);
        }
    }

    #[test]
    fn sign_walk_value() {
        let prog = corpus::lookup("sign_walk").unwrap().program();
        let (g, body) = split(&prog);
        let opts = EvalOptions::default().with_tol(1e-12);
        for (v, expect) in [(9, 26.0 / 9.0), (-6, -17.0 / 9.0), (0, 0.0)] {
            let out = wpt_loop_value(g, body, &w_post(), &x(v), &opts).unwrap();
            assert!((to_f64(out.value.first()) - expect).abs() < 1e-9);
            assert!(out.value.is_integrable());
        }
    }

    #[test]
    fn direct_and_decomposed_iterates_agree() {
        let prog = corpus::lookup("sign_walk").unwrap().program();
        let (g, body) = split(&prog);
        let opts = EvalOptions::default();
        for v in -4..=4 {
            for n in 0..=12 {
                let t = char_triple_iterate(g, body, &w_post(), &x(v), n, &opts).unwrap();
                let d = mixed_iterate(g, body, &w_post(), &x(v), n, &opts).unwrap();
                assert_eq!(t.recompose(), d, "x={v} n={n}");
            }
        }
    }

    #[test]
    fn nested_loops_resolve_inner_first() {
        // The inner loop always leaves y = 0, and the outer loop stops with
        // probability 1/2 each round: E[x] = x + 1.
        let prog = crate::frontend::parse_program(
            "while (1/2) { y := 3; while (y > 0) { y := y - 1 }; x := x + 1 }",
        )
        .unwrap();
        let s = State::from_pairs([("x", -4), ("y", 0)]);
        let out = wpt_value(&prog, &w_post(), &s, &EvalOptions::default()).unwrap();
        assert!((to_f64(out.value.first()) + 3.0).abs() < 1e-9);
        let (g, body) = split(&prog);
        for n in 0..8 {
            let t =
                char_triple_iterate(g, body, &w_post(), &s, n, &EvalOptions::default()).unwrap();
            let d = mixed_iterate(g, body, &w_post(), &s, n, &EvalOptions::default()).unwrap();
            assert_eq!(t.recompose(), d);
        }
    }
}
