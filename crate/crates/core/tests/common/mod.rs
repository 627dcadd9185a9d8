//! Random programs, states and expectations shared by the integration tests.
#![allow(dead_code)]

use iwe::{q, qi, Expr, ProbGuard, Program, State};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const VARS: [&str; 3] = ["x", "y", "z"];
pub const GUARDS: [(i64, i64); 4] = [(1, 4), (1, 3), (1, 2), (2, 3)];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn state(rng: &mut impl Rng) -> State {
    State::from_pairs(VARS.iter().map(|v| (*v, rng.gen_range(-3..=3))))
}

pub fn states(rng: &mut impl Rng, n: usize) -> Vec<State> {
    (0..n).map(|_| state(rng)).collect()
}

fn var(rng: &mut impl Rng) -> Expr {
    Expr::var(VARS.choose(rng).unwrap())
}

fn guard(rng: &mut impl Rng) -> Expr {
    let (n, d) = *GUARDS.choose(rng).unwrap();
    Expr::Const(q(n, d))
}

/// A small integer-valued expression over the program variables.
pub fn int_expr(rng: &mut impl Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.35) {
        return if rng.gen_bool(0.6) {
            var(rng)
        } else {
            Expr::int(rng.gen_range(-3..=3))
        };
    }
    let a = int_expr(rng, depth - 1);
    match rng.gen_range(0..7) {
        0 => Expr::add(a, int_expr(rng, depth - 1)),
        1 => Expr::sub(a, int_expr(rng, depth - 1)),
        2 => Expr::mul(Expr::int(rng.gen_range(-2..=2)), a),
        3 => Expr::abs(a),
        4 => Expr::neg(a),
        5 => Expr::max(a, int_expr(rng, depth - 1)),
        _ => Expr::min(a, int_expr(rng, depth - 1)),
    }
}

/// A post-expectation over all variables that usually takes both signs.
pub fn mixed_post(rng: &mut impl Rng) -> Expr {
    let mut f = Expr::rat(rng.gen_range(-5..=5), 2);
    for v in VARS {
        let c = Expr::int(*[-2, -1, 1, 2].choose(rng).unwrap());
        f = Expr::add(f, Expr::mul(c, Expr::var(v)));
    }
    match rng.gen_range(0..4) {
        0 => Expr::mul(var(rng), var(rng)),
        1 => Expr::add(f, int_expr(rng, 2)),
        _ => f,
    }
}

/// A loop-free program with at most `budget` atomic statements and guards
/// drawn from `GUARDS`.
pub fn loop_free(rng: &mut impl Rng, budget: usize) -> Program {
    let mut left = rng.gen_range(budget.min(3)..=budget);
    block(rng, &mut left, 2)
}

fn block(rng: &mut impl Rng, left: &mut usize, depth: u32) -> Program {
    let mut stmts = Vec::new();
    while *left > 0 && (stmts.is_empty() || rng.gen_bool(0.85)) {
        *left -= 1;
        let s = match rng.gen_range(0..10) {
            0 => Program::Skip,
            1..=4 => Program::assign(VARS.choose(rng).unwrap(), int_expr(rng, 2)),
            _ if depth == 0 => Program::assign(VARS.choose(rng).unwrap(), int_expr(rng, 1)),
            _ => {
                let g = guard(rng);
                let a = block(rng, left, depth - 1);
                let b = if *left > 0 && rng.gen_bool(0.6) {
                    block(rng, left, depth - 1)
                } else {
                    Program::Skip
                };
                Program::ite(g, a, b)
            }
        };
        stmts.push(s);
    }
    Program::sequence(stmts)
}

/// Assignments that keep reachable states on a small lattice.
fn walk_step(rng: &mut impl Rng) -> Program {
    let v = *["x", "y"].choose(rng).unwrap();
    let e = match rng.gen_range(0..5) {
        0 | 1 => Expr::add(
            Expr::var(v),
            Expr::int(*[-2, -1, 1, 2].choose(rng).unwrap()),
        ),
        2 => Expr::neg(Expr::var(v)),
        3 => Expr::int(rng.gen_range(-2..=2)),
        _ => Expr::var(if v == "x" { "y" } else { "x" }),
    };
    Program::assign(v, e)
}

/// `while (guard) { body }` with a loop-free body over `x` and `y`.
pub fn random_loop(rng: &mut impl Rng) -> (ProbGuard, Program) {
    let g = match rng.gen_range(0..3) {
        0 => guard(rng),
        1 => Expr::indicator(
            iwe::parse_predicate(["x > 0", "x != 0", "y <= x"].choose(rng).unwrap()).unwrap(),
        ),
        _ => Expr::mul(
            guard(rng),
            Expr::indicator(
                iwe::parse_predicate(["x >= 0", "y != 1"].choose(rng).unwrap()).unwrap(),
            ),
        ),
    };
    let mut stmts = vec![walk_step(rng)];
    for _ in 0..rng.gen_range(0..=2) {
        stmts.push(if rng.gen_bool(0.3) {
            Program::ite(guard(rng), walk_step(rng), walk_step(rng))
        } else {
            walk_step(rng)
        });
    }
    (ProbGuard::new(g), Program::sequence(stmts))
}

pub fn loop_post(rng: &mut impl Rng) -> Expr {
    let a = Expr::mul(Expr::int(rng.gen_range(-2..=2)), Expr::var("x"));
    let b = Expr::mul(Expr::int(rng.gen_range(-2..=2)), Expr::var("y"));
    Expr::add(Expr::add(a, b), Expr::Const(qi(rng.gen_range(-3..=3))))
}

pub fn loop_state(rng: &mut impl Rng) -> State {
    State::from_pairs([("x", rng.gen_range(-3..=3)), ("y", rng.gen_range(-3..=3))])
}

pub mod checks {
    use iwe::domain::eval_expr;
    use iwe::wpt::{char_triple_iterate, mixed_iterate};
    use iwe::{
        qi, wp_loop_iterate, wp_value, EvalOptions, Expr, ExtNonNeg, IwPairExpr, IwValue,
        ProbGuard, Program, State, Value,
    };
    use num_rational::BigRational;
    use num_traits::Signed;
    use rand::Rng;

    pub fn random_iw(rng: &mut impl Rng) -> IwValue {
        let first = BigRational::new(rng.gen_range(-6..=6).into(), rng.gen_range(1..=3).into());
        if rng.gen_bool(0.2) {
            return IwValue::diverged();
        }
        let slack = BigRational::new(rng.gen_range(0..=4).into(), 2.into());
        IwValue::of(first.clone(), ExtNonNeg::Finite(first.abs() + slack))
    }

    /// Quasi-order and equivalence laws over every pair and triple of `vs`.
    pub fn order_laws(vs: &[IwValue]) -> Result<(), String> {
        for a in vs {
            if !a.leq(a) || !a.equiv(a) {
                return Err(format!("reflexivity fails at {a}"));
            }
            if a.canonical().canonical() != a.canonical() || !a.canonical().equiv(a) {
                return Err(format!("canonicalisation misbehaves at {a}"));
            }
            for b in vs {
                if a.equiv(b) != b.equiv(a) {
                    return Err(format!("equivalence not symmetric on {a}, {b}"));
                }
                let (ca, cb) = (a.canonical(), b.canonical());
                if ca.leq(&cb) && cb.leq(&ca) && !ca.equiv(&cb) {
                    return Err(format!("antisymmetry fails on canonical {ca}, {cb}"));
                }
                let r = BigRational::new(rng_free_scale(a, b), 3.into());
                for v in [a.add(b), a.scale(&r).map_err(|e| e.to_string())?] {
                    if !within_witness(&v) {
                        return Err(format!("{v}, from {a} and {b}, breaks |first| <= witness"));
                    }
                }
                for c in vs {
                    if a.leq(b) && b.leq(c) && !a.leq(c) {
                        return Err(format!("transitivity fails on {a}, {b}, {c}"));
                    }
                    if a.equiv(b) && b.equiv(c) && !a.equiv(c) {
                        return Err(format!("equivalence not transitive on {a}, {b}, {c}"));
                    }
                }
            }
        }
        Ok(())
    }

    fn within_witness(v: &IwValue) -> bool {
        match v.witness() {
            ExtNonNeg::Finite(w) => v.first().abs() <= *w,
            ExtNonNeg::Inf => true,
        }
    }

    /// A non-zero scale factor derived from the operands, so that scaling an
    /// infinite witness never meets zero.
    fn rng_free_scale(a: &IwValue, b: &IwValue) -> num_bigint::BigInt {
        let k = a.first().numer() - b.first().numer();
        if k == 0.into() {
            (-2).into()
        } else {
            k
        }
    }

    /// `(4, inf)` and `(7, inf)` are below each other without being equal.
    pub fn raw_antisymmetry_failure() -> Result<(), String> {
        let a = IwValue::new(qi(4), ExtNonNeg::Inf).map_err(|e| e.to_string())?;
        let b = IwValue::new(qi(7), ExtNonNeg::Inf).map_err(|e| e.to_string())?;
        if a.leq(&b) && b.leq(&a) && a != b && a.equiv(&b) {
            Ok(())
        } else {
            Err(format!(
                "expected mutual order without equality on {a}, {b}"
            ))
        }
    }

    fn finite(v: &ExtNonNeg) -> Option<&BigRational> {
        v.finite()
    }

    /// Checks the mixed iterate against the triple and against three
    /// independent non-negative iterations, for every `n <= n_max`; also the
    /// monotonicity and bounds of the triple.
    pub fn decomposition(
        guard: &ProbGuard,
        body: &Program,
        f: &Expr,
        s: &State,
        n_max: usize,
        opts: &EvalOptions,
    ) -> Result<(), String> {
        let p = IwPairExpr::with_abs_witness(f.clone()).map_err(|e| e.to_string())?;
        let plus = Expr::add(Expr::abs(f.clone()), f.clone());
        let abs = Expr::abs(f.clone());
        let ctx = |n: usize| {
            format!(
                "while ({}) {{ {body} }} with post {f} at {s}, n = {n}",
                guard.0
            )
        };
        let mut prev: Option<(ExtNonNeg, ExtNonNeg, ExtNonNeg)> = None;
        for n in 0..=n_max {
            let err = |e: iwe::EvalError| format!("{}: {e}", ctx(n));
            let direct = mixed_iterate(guard, body, &p, s, n, opts).map_err(err)?;
            let t = char_triple_iterate(guard, body, &p, s, n, opts).map_err(err)?;
            if direct != t.recompose() {
                return Err(format!("{}: direct {direct} vs triple {t}", ctx(n)));
            }
            let a = wp_loop_iterate(guard, body, &plus, s, n, opts).map_err(err)?;
            let b = wp_loop_iterate(guard, body, &abs, s, n, opts).map_err(err)?;
            if (a.clone(), b.clone(), b.clone()) != (t.a.clone(), t.b.clone(), t.c.clone()) {
                return Err(format!(
                    "{}: triple {t} vs separate ({a}, {b}, {b})",
                    ctx(n)
                ));
            }
            if let Some((pa, pb, pc)) = &prev {
                if !(*pa <= t.a && *pb <= t.b && *pc <= t.c) {
                    return Err(format!("{}: triple decreased", ctx(n)));
                }
            }
            if t.b > t.c {
                return Err(format!("{}: b > c in {t}", ctx(n)));
            }
            if let (Some(a), Some(c)) = (finite(&t.a), finite(&t.c)) {
                if *a > c * qi(2) {
                    return Err(format!("{}: a > 2c in {t}", ctx(n)));
                }
            }
            prev = Some((t.a, t.b, t.c));
        }
        Ok(())
    }

    fn value(v: &ExtNonNeg) -> Value {
        v.to_value()
    }

    /// `wp(C, f + r g) = wp(C, f) + r wp(C, g)` at `s`, exactly.
    pub fn linearity(
        prog: &Program,
        f: &Expr,
        g: &Expr,
        r: &BigRational,
        s: &State,
    ) -> Result<(), String> {
        let opts = EvalOptions::default();
        let combined = Expr::add(f.clone(), Expr::mul(Expr::Const(r.clone()), g.clone()));
        let wp = |e: &Expr| {
            wp_value(prog, e, s, &opts)
                .map(|o| value(&o.value))
                .map_err(|e| e.to_string())
        };
        let (lhs, wf, wg) = (wp(&combined)?, wp(f)?, wp(g)?);
        let rhs = match (wf, wg) {
            (Value::Finite(a), Value::Finite(b)) => Value::Finite(a + r * b),
            _ => Value::Inf,
        };
        if lhs == rhs {
            Ok(())
        } else {
            Err(format!(
                "{prog} at {s}: wp({combined}) = {lhs} but {f}, {g} give {rhs}"
            ))
        }
    }

    /// Evaluates a finite expression, for building expected values.
    pub fn at(e: &Expr, s: &State) -> BigRational {
        match eval_expr(e, s, &EvalOptions::default().series).unwrap() {
            Value::Finite(r) => r,
            Value::Inf => panic!("{e} is infinite at {s}"),
        }
    }
}
