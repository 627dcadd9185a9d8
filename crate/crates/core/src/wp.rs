//! The classical weakest pre-expectation transformer on non-negative
//! expectations, with invariant-based bounds for loops.

use num_traits::Zero;
use serde::Serialize;

use crate::check::{self, CheckRow, ConditionSummary};
use crate::domain::{eval_expr, EvalOptions, ExtNonNeg, Outcome, State, Value};
use crate::engine::{Backward, Engine};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{fold_constants, substitute, Expr, FreeVars, ProbGuard, Program};

/// `wp(C, f)` as an expression, for loop-free `C`. Only constants are folded;
/// no other simplification is attempted.
pub fn wp_symbolic(prog: &Program, f: &Expr) -> EvalResult<Expr> {
    Ok(match prog {
        Program::Skip => f.clone(),
        Program::Assign(x, e) => fold_constants(&substitute(f, x, e)),
        Program::Seq(a, b) => wp_symbolic(a, &wp_symbolic(b, f)?)?,
        Program::If(g, a, b) => branch(g.expr(), wp_symbolic(a, f)?, wp_symbolic(b, f)?),
        Program::While(..) => return Err(EvalError::LoopNotAllowed),
    })
}

/// `ξ * a + (1 - ξ) * b`, dropping a branch whose weight folds to zero.
pub(crate) fn branch(g: &Expr, a: Expr, b: Expr) -> Expr {
    let g = fold_constants(g);
    let rest = fold_constants(&Expr::sub(Expr::one(), g.clone()));
    match (g.as_const(), rest.as_const()) {
        (Some(p), _) if p.is_zero() => b,
        (_, Some(q)) if q.is_zero() => a,
        _ => fold_constants(&Expr::add(Expr::mul(g, a), Expr::mul(rest, b))),
    }
}

/// Evaluates a non-negative expectation at a state.
pub(crate) fn eval_nonneg(f: &Expr, s: &State, opts: &EvalOptions) -> EvalResult<ExtNonNeg> {
    let v = eval_expr(f, s, &opts.series)?;
    ExtNonNeg::from_value(v.clone()).ok_or_else(|| EvalError::NegativeExpectation {
        state: s.to_string(),
        value: v.to_string(),
    })
}

/// `Φⁿ(0)(σ)` for the characteristic functional of `while (guard) { body }`
/// with respect to `f`, by backward recursion memoised on
/// `(remaining unfoldings, state)`.
pub fn wp_loop_iterate(
    guard: &ProbGuard,
    body: &Program,
    f: &Expr,
    s: &State,
    n: usize,
    opts: &EvalOptions,
) -> EvalResult<ExtNonNeg> {
    let engine = Engine::new(opts);
    let it = Backward::new(
        &engine,
        guard,
        body,
        Box::new(|t: &State| eval_nonneg(f, t, opts)),
    );
    it.at(n, s)
}

/// `wp(C, f)(σ)`. Loops are resolved as limits of their iterates under
/// `opts.loops`; a divergence verdict shows up as `inf` and is flagged in
/// the returned convergence data.
pub fn wp_value(
    prog: &Program,
    f: &Expr,
    s: &State,
    opts: &EvalOptions,
) -> EvalResult<Outcome<ExtNonNeg>> {
    let engine = Engine::new(opts);
    let value = engine.run(prog, &|t: &State| eval_nonneg(f, t, opts), s)?;
    Ok(Outcome {
        value,
        convergence: engine.convergence(),
        traces: engine.take_traces(),
    })
}

/// Result of a grid check of a non-negative loop invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonNegCheckReport {
    pub pass: bool,
    pub conditions: Vec<ConditionSummary>,
    pub rows: Vec<CheckRow>,
}

impl NonNegCheckReport {
    fn build(names: &[&str], rows: Vec<CheckRow>, tolerant: bool) -> Self {
        let conditions: Vec<_> = names
            .iter()
            .map(|n| check::summarise(n, &rows, tolerant))
            .collect();
        NonNegCheckReport {
            pass: conditions.iter().all(|c| c.pass),
            conditions,
            rows,
        }
    }
}

fn require_loop_free(body: &Program) -> EvalResult<()> {
    if body.is_loop_free() {
        Ok(())
    } else {
        Err(EvalError::LoopNotAllowed)
    }
}

/// Checks `Φ_f(I) <= I` at every grid state; when it holds everywhere, `I`
/// is an upper bound on `wp(while (guard) { body }, f)` there.
pub fn verify_upper_invariant(
    guard: &ProbGuard,
    body: &Program,
    f: &Expr,
    inv: &Expr,
    grid: &[State],
    tol: f64,
    opts: &EvalOptions,
) -> EvalResult<NonNegCheckReport> {
    require_loop_free(body)?;
    let body_wp = wp_symbolic(body, inv)?;
    let margin = check::margin(tol, &[f, inv]);
    let mut rows = Vec::with_capacity(grid.len());
    for s in grid {
        let lhs = check::phi(guard, f, Some(&body_wp), s, &opts.series, &margin)?;
        let rhs = check::nonneg(eval_expr(inv, s, &opts.series)?, s, &margin)?;
        rows.push(CheckRow {
            condition: "phi(I) <= I".into(),
            state: s.clone(),
            n: None,
            ok: check::leq_within(&lhs, &rhs, &margin),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        });
    }
    Ok(NonNegCheckReport::build(
        &["phi(I) <= I"],
        rows,
        !margin.is_zero(),
    ))
}

/// Checks `H_0 <= Φ_f(0)` and `H_{n+1} <= Φ_f(H_n)` for `n < n_max` at every
/// grid state. `h` mentions the family index as the variable `index`.
#[allow(clippy::too_many_arguments)]
pub fn verify_lower_omega_invariant(
    guard: &ProbGuard,
    body: &Program,
    f: &Expr,
    h: &Expr,
    index: &str,
    grid: &[State],
    n_max: usize,
    tol: f64,
    opts: &EvalOptions,
) -> EvalResult<NonNegCheckReport> {
    require_loop_free(body)?;
    check_index(index, guard, body)?;
    let body_wp = wp_symbolic(body, h)?;
    let margin = check::margin(tol, &[f, h]);
    let mut rows = Vec::new();
    for s in grid {
        let h0 = eval_h(h, index, 0, s, opts, &margin)?;
        let phi0 = check::phi(guard, f, None, s, &opts.series, &margin)?;
        rows.push(row("H_0 <= phi(0)", s, Some(0), &h0, &phi0, &margin));
        for n in 0..n_max {
            let next = eval_h(h, index, n + 1, s, opts, &margin)?;
            let phin = check::phi(
                guard,
                f,
                Some(&body_wp),
                &with_index(s, index, n),
                &opts.series,
                &margin,
            )?;
            rows.push(row("H_n+1 <= phi(H_n)", s, Some(n), &next, &phin, &margin));
        }
    }
    Ok(NonNegCheckReport::build(
        &["H_0 <= phi(0)", "H_n+1 <= phi(H_n)"],
        rows,
        !margin.is_zero(),
    ))
}

/// Bound certified for the loop of a non-negative program.
#[derive(Debug, Clone, PartialEq)]
pub enum WpBound {
    /// `wp(loop, f) <= I`.
    Upper(Expr),
    /// `supₙ Hₙ <= wp(loop, f)`, with the family index named.
    Lower(Expr, String),
}

/// A bound on `wp(prefix; loop, f)` at an initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WpEntryBound {
    pub state: State,
    pub bound: ExtNonNeg,
    pub engine: ExtNonNeg,
    /// Every state the prefix can reach the loop in lies in the grid.
    pub certified: bool,
    pub consistent: bool,
}

/// Pushes a loop bound back through the loop-free `prefix` and compares it
/// with the engine's value for the whole program.
#[allow(clippy::too_many_arguments)]
pub fn wp_entry_bounds(
    prefix: &Program,
    guard: &ProbGuard,
    body: &Program,
    f: &Expr,
    bound: &WpBound,
    grid: &[State],
    entries: &[State],
    tol: f64,
    opts: &EvalOptions,
) -> EvalResult<Vec<WpEntryBound>> {
    let index = check::GridIndex::new(grid);
    let whole = Program::seq(
        prefix.clone(),
        Program::While(guard.clone(), Box::new(body.clone())),
    );
    let at = |t: &State| -> EvalResult<ExtNonNeg> {
        match bound {
            WpBound::Upper(inv) => eval_nonneg(inv, t, opts),
            WpBound::Lower(h, idx) => crate::invariants::sup_h(h, idx, t, &opts.series),
        }
    };
    let m = crate::domain::rat_from_f64(tol);
    entries
        .iter()
        .map(|s| {
            let mut total = ExtNonNeg::zero();
            let mut certified = true;
            for (t, mass) in check::prefix_outcomes(prefix, s, &opts.series)? {
                certified &= index.covers(&t);
                let v = at(&t)?;
                total = total.add(
                    &v.scale(&mass)
                        .ok_or_else(|| EvalError::ZeroTimesInf(format!("{mass} * {v}")))?,
                );
            }
            let engine = wp_value(&whole, f, s, opts)?.value;
            let consistent = match bound {
                WpBound::Upper(_) => engine <= total.add(&ExtNonNeg::Finite(m.clone())),
                WpBound::Lower(..) => total <= engine.add(&ExtNonNeg::Finite(m.clone())),
            };
            Ok(WpEntryBound {
                state: s.clone(),
                bound: total,
                engine,
                certified,
                consistent,
            })
        })
        .collect()
}

pub(crate) fn row(
    cond: &str,
    s: &State,
    n: Option<usize>,
    lhs: &Value,
    rhs: &Value,
    margin: &num_rational::BigRational,
) -> CheckRow {
    CheckRow {
        condition: cond.to_string(),
        state: s.clone(),
        n,
        ok: check::leq_within(lhs, rhs, margin),
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    }
}

pub(crate) fn check_index(index: &str, guard: &ProbGuard, body: &Program) -> EvalResult<()> {
    if body.free_variables().contains(index) || guard.expr().free_variables().contains(index) {
        return Err(EvalError::Precondition(format!(
            "family index `{index}` clashes with a program variable"
        )));
    }
    Ok(())
}

pub(crate) fn with_index(s: &State, index: &str, n: usize) -> State {
    s.with(index, n.into())
}

pub(crate) fn eval_h(
    h: &Expr,
    index: &str,
    n: usize,
    s: &State,
    opts: &EvalOptions,
    margin: &num_rational::BigRational,
) -> EvalResult<Value> {
    let t = with_index(s, index, n);
    check::nonneg(eval_expr(h, &t, &opts.series)?, &t, margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{q, qi};
    use crate::frontend::{parse_expression, parse_program};

    fn e(src: &str) -> Expr {
        parse_expression(src).unwrap()
    }

    fn split_loop(src: &str) -> (ProbGuard, Program) {
        match parse_program(src).unwrap() {
            Program::While(g, b) => (g, *b),
            _ => panic!("not a loop"),
        }
    }

    #[test]
    fn truncated_geometric_symbolic() {
        let p = parse_program(
            "if (1/2) { skip } else { x := x + 1; if (1/2) { skip } else { x := x + 1 } }",
        )
        .unwrap();
        let w = wp_symbolic(&p, &e("x")).unwrap();
        for x in -10..=10 {
            let s = State::from_pairs([("x", x)]);
            let v = eval_expr(&w, &s, &Default::default()).unwrap();
            assert_eq!(v, Value::Finite(qi(x) + q(3, 4)));
        }
    }

    #[test]
    fn symbolic_rejects_loops() {
        let p = parse_program("while (1/2) { skip }").unwrap();
        assert_eq!(wp_symbolic(&p, &e("1")), Err(EvalError::LoopNotAllowed));
    }

    #[test]
    fn guard_constants_drop_branches() {
        let p = parse_program("if (1) { x := 1 } else { x := 1 / 0 }").unwrap();
        assert_eq!(wp_symbolic(&p, &e("x")).unwrap(), e("1"));
    }

    #[test]
    fn geometric_loop_iterates() {
        // Φⁿ(0)(x=1) = sum_{i<n} (1+i) / 2^(i+1), increasing to 2.
        let (g, body) = split_loop("while (1/2) { x := x + 1 }");
        let s = State::from_pairs([("x", 1)]);
        let opts = EvalOptions::default();
        let mut prev = ExtNonNeg::zero();
        for n in 0..40 {
            let v = wp_loop_iterate(&g, &body, &e("x"), &s, n, &opts).unwrap();
            let mut expect = qi(0);
            for i in 0..n as i64 {
                expect += qi(1 + i) / qi(2).pow((i + 1) as i32);
            }
            assert_eq!(v, ExtNonNeg::Finite(expect));
            assert!(prev <= v);
            prev = v;
        }
        let out = wp_value(&Program::While(g, Box::new(body)), &e("x"), &s, &opts).unwrap();
        assert!((out.value.to_f64() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_countdown_is_exact() {
        let p = parse_program("while (x != 0) { x := x - 1 }").unwrap();
        let s = State::from_pairs([("x", 3)]);
        let out = wp_value(&p, &e("1"), &s, &EvalOptions::default()).unwrap();
        assert_eq!(out.value, ExtNonNeg::Finite(qi(1)));
        assert!(!out.convergence.heuristic);
        assert_eq!(out.convergence.iterations, 4);
    }

    #[test]
    fn nonterminating_loop_has_zero_expectation() {
        let p = parse_program("while (1) { skip }").unwrap();
        let out = wp_value(&p, &e("1"), &State::new(), &EvalOptions::default()).unwrap();
        assert_eq!(out.value, ExtNonNeg::zero());
    }

    #[test]
    fn negative_post_rejected() {
        let p = parse_program("x := x - 5").unwrap();
        let s = State::from_pairs([("x", 1)]);
        assert!(matches!(
            wp_value(&p, &e("x"), &s, &EvalOptions::default()),
            Err(EvalError::NegativeExpectation { .. })
        ));
    }

    #[test]
    fn kozen_invariant_and_wrong_invariant() {
        let (g, body) =
            split_loop("while (x != 0) { if (1/2) { skip } else { x := x - 1 }; c := c + 1 }");
        let grid: Vec<State> = (-5..=30)
            .flat_map(|x| (0..=10).map(move |c| State::from_pairs([("x", x), ("c", c)])))
            .collect();
        let opts = EvalOptions::default();
        let good = verify_upper_invariant(
            &g,
            &body,
            &e("c"),
            &e("[x >= 0] * (c + 2*x)"),
            &grid,
            0.0,
            &opts,
        )
        .unwrap();
        assert!(good.pass);
        assert!(!good.conditions[0].tolerant);
        let bad = verify_upper_invariant(
            &g,
            &body,
            &e("c"),
            &e("[x >= 0] * (c + x)"),
            &grid,
            0.0,
            &opts,
        )
        .unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn lower_omega_family() {
        // Hₙ = Φⁿ⁺¹(0) exactly for the geometric loop with post x.
        let (g, body) = split_loop("while (1/2) { x := x + 1 }");
        let h = e("sum(i, 0, n, (x + i) / 2^(i+1))");
        let grid: Vec<State> = (0..5).map(|x| State::from_pairs([("x", x)])).collect();
        let r = verify_lower_omega_invariant(
            &g,
            &body,
            &e("x"),
            &h,
            "n",
            &grid,
            20,
            0.0,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(r.pass, "{:?}", r.conditions);
        let clash = verify_lower_omega_invariant(
            &g,
            &body,
            &e("x"),
            &h,
            "x",
            &grid,
            2,
            0.0,
            &EvalOptions::default(),
        );
        assert!(matches!(clash, Err(EvalError::Precondition(_))));
    }
}
