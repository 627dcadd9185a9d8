//! Grid checks of loop-invariant certificates for mixed-sign posts.
//!
//! For `while (ξ) { body }` and a post pair `(f, g)` an upper certificate
//! `(I, G, Hₙ)` must satisfy
//!
//! 1. `Φ_g(G) <= G`
//! 2. `Φ_{|f|+f}(I) <= I`
//! 3. `H₀ <= Φ_{|f|}(0)`
//! 4. `Hₙ₊₁ <= Φ_{|f|}(Hₙ)`
//!
//! and then the loop's value is below `(I - supₙ Hₙ, 2G)`. A lower
//! certificate swaps `|f|+f` and `|f|` in conditions 2 to 4 and bounds the
//! value from below by `(supₙ Hₙ - I, 2G)`.

use num_rational::BigRational;
use serde::Serialize;

use crate::check::{self, CheckRow, ConditionSummary};
use crate::domain::{
    eval_expr, rat_from_f64, rational_str, ConvergencePolicy, EvalOptions, ExtNonNeg, Increments,
    IwValue, State, Value,
};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{Expr, ProbGuard, Program};
use crate::wp::{check_index, eval_h, row, with_index, wp_symbolic};
use crate::wpt::{wpt_loop_value, wpt_value, IwPairExpr};

/// How many members of `Hₙ` [`sup_h`] may inspect.
pub const N_SUP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedCertificate {
    pub guard: ProbGuard,
    pub body: Program,
    pub post: IwPairExpr,
    pub inv: Expr,
    pub witness_inv: Expr,
    /// The family `Hₙ`, mentioning its index as the variable `index`.
    pub family: Expr,
    pub index: String,
    pub grid: Vec<State>,
    pub n_max: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

/// The certified bound at one state, next to the engine's value there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub state: State,
    #[serde(with = "rational_str")]
    pub first: BigRational,
    pub witness: ExtNonNeg,
    pub sup_h: ExtNonNeg,
    pub engine: IwValue,
    /// The engine's value lies on the certified side of the bound.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub direction: Direction,
    pub pass: bool,
    pub conditions: Vec<ConditionSummary>,
    /// Per-state bounds; only computed when every condition holds.
    pub bounds: Vec<BoundRow>,
    pub engine_consistent: bool,
    pub failures: Vec<CheckRow>,
}

const CONDITIONS: [&str; 4] = [
    "phi_g(G) <= G",
    "phi(I) <= I",
    "H_0 <= phi(0)",
    "H_n+1 <= phi(H_n)",
];

pub fn check_mixed_upper(
    cert: &MixedCertificate,
    opts: &EvalOptions,
) -> EvalResult<CertificateReport> {
    check(cert, Direction::Upper, opts)
}

pub fn check_mixed_lower(
    cert: &MixedCertificate,
    opts: &EvalOptions,
) -> EvalResult<CertificateReport> {
    check(cert, Direction::Lower, opts)
}

fn check(
    cert: &MixedCertificate,
    dir: Direction,
    opts: &EvalOptions,
) -> EvalResult<CertificateReport> {
    if !cert.body.is_loop_free() {
        return Err(EvalError::LoopNotAllowed);
    }
    check_index(&cert.index, &cert.guard, &cert.body)?;
    let f = &cert.post.first;
    let abs = Expr::abs(f.clone());
    let pos = Expr::add(abs.clone(), f.clone());
    let (inv_post, family_post) = match dir {
        Direction::Upper => (&pos, &abs),
        Direction::Lower => (&abs, &pos),
    };
    let (g_wp, i_wp, h_wp) = (
        wp_symbolic(&cert.body, &cert.witness_inv)?,
        wp_symbolic(&cert.body, &cert.inv)?,
        wp_symbolic(&cert.body, &cert.family)?,
    );
    let margin = check::margin(
        cert.tol,
        &[
            f,
            &cert.post.witness,
            &cert.inv,
            &cert.witness_inv,
            &cert.family,
        ],
    );
    let policy = &opts.series;
    let guard = &cert.guard;

    let mut rows = Vec::new();
    for s in &cert.grid {
        let g_here = check::nonneg(eval_expr(&cert.witness_inv, s, policy)?, s, &margin)?;
        if g_here == Value::Inf {
            return Err(EvalError::Precondition(format!("G is infinite at {s}")));
        }
        let lhs = check::phi(guard, &cert.post.witness, Some(&g_wp), s, policy, &margin)?;
        rows.push(row(CONDITIONS[0], s, None, &lhs, &g_here, &margin));

        let i_here = check::nonneg(eval_expr(&cert.inv, s, policy)?, s, &margin)?;
        let lhs = check::phi(guard, inv_post, Some(&i_wp), s, policy, &margin)?;
        rows.push(row(CONDITIONS[1], s, None, &lhs, &i_here, &margin));

        let h0 = eval_h(&cert.family, &cert.index, 0, s, opts, &margin)?;
        let rhs = check::phi(guard, family_post, None, s, policy, &margin)?;
        rows.push(row(CONDITIONS[2], s, Some(0), &h0, &rhs, &margin));

        for n in 0..cert.n_max {
            let next = eval_h(&cert.family, &cert.index, n + 1, s, opts, &margin)?;
            let t = with_index(s, &cert.index, n);
            let rhs = check::phi(guard, family_post, Some(&h_wp), &t, policy, &margin)?;
            rows.push(row(CONDITIONS[3], s, Some(n), &next, &rhs, &margin));
        }
    }

    let tolerant = !num_traits::Zero::is_zero(&margin);
    let conditions: Vec<_> = CONDITIONS
        .iter()
        .map(|c| check::summarise(c, &rows, tolerant))
        .collect();
    let pass = conditions.iter().all(|c| c.pass);
    let mut bounds = Vec::new();
    if pass {
        for s in &cert.grid {
            bounds.push(bound_at(cert, dir, s, opts)?);
        }
    }
    Ok(CertificateReport {
        direction: dir,
        pass,
        engine_consistent: bounds.iter().all(|b| b.consistent),
        conditions,
        bounds,
        failures: rows.into_iter().filter(|r| !r.ok).collect(),
    })
}

/// The certified bound at `s`: first component and witness, with
/// `supₙ Hₙ(σ)`. Only meaningful where the certificate's conditions hold.
pub fn certified_bound(
    cert: &MixedCertificate,
    dir: Direction,
    s: &State,
    opts: &EvalOptions,
) -> EvalResult<(BigRational, BigRational, ExtNonNeg)> {
    let policy = &opts.series;
    let finite = |v: Value| match v {
        Value::Finite(r) => Ok(r),
        Value::Inf => Err(EvalError::Precondition(format!(
            "certificate is infinite at {s}"
        ))),
    };
    let sup = sup_h(&cert.family, &cert.index, s, policy)?;
    let sup_r = finite(sup.to_value())?;
    let i = finite(eval_expr(&cert.inv, s, policy)?)?;
    let g = finite(eval_expr(&cert.witness_inv, s, policy)?)?;
    let first = match dir {
        Direction::Upper => &i - &sup_r,
        Direction::Lower => &sup_r - &i,
    };
    Ok((first, BigRational::from_integer(2.into()) * g, sup))
}

/// Upper: `engine ⊑ (first, witness)`. Lower: `(first, witness) ⊑ engine`
/// on first components. Both up to `tol`.
fn consistent(
    dir: Direction,
    engine: &IwValue,
    first: &BigRational,
    witness: &BigRational,
    tol: f64,
) -> bool {
    let m = rat_from_f64(tol);
    match dir {
        Direction::Upper => {
            engine.is_integrable()
                && engine.first() <= &(first + &m)
                && engine.witness() <= &ExtNonNeg::Finite(witness + &m)
        }
        Direction::Lower => !engine.is_integrable() || first <= &(engine.first() + &m),
    }
}

fn bound_at(
    cert: &MixedCertificate,
    dir: Direction,
    s: &State,
    opts: &EvalOptions,
) -> EvalResult<BoundRow> {
    let (first, witness, sup) = certified_bound(cert, dir, s, opts)?;
    let engine = wpt_loop_value(&cert.guard, &cert.body, &cert.post, s, opts)?.value;
    Ok(BoundRow {
        state: s.clone(),
        consistent: consistent(dir, &engine, &first, &witness, cert.tol),
        first,
        witness: ExtNonNeg::Finite(witness),
        sup_h: sup,
        engine,
    })
}

/// A certified bound for a whole program `prefix; while (ξ) { body }` at an
/// initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryBound {
    pub state: State,
    #[serde(with = "rational_str")]
    pub first: BigRational,
    pub witness: ExtNonNeg,
    pub engine: IwValue,
    /// Every state the prefix can reach the loop in lies in the grid.
    pub certified: bool,
    pub consistent: bool,
}

/// Pushes the loop bound of a passing certificate back through the
/// loop-free `prefix`, and compares with the engine on the whole program.
pub fn entry_bounds(
    prefix: &Program,
    cert: &MixedCertificate,
    dir: Direction,
    entries: &[State],
    opts: &EvalOptions,
) -> EvalResult<Vec<EntryBound>> {
    let index = check::GridIndex::new(&cert.grid);
    let whole = Program::seq(
        prefix.clone(),
        Program::While(cert.guard.clone(), Box::new(cert.body.clone())),
    );
    entries
        .iter()
        .map(|s| {
            let mut first = BigRational::from_integer(0.into());
            let mut witness = first.clone();
            let mut certified = true;
            for (t, m) in check::prefix_outcomes(prefix, s, &opts.series)? {
                certified &= index.covers(&t);
                let (f, w, _) = certified_bound(cert, dir, &t, opts)?;
                first += &m * f;
                witness += &m * w;
            }
            let engine = wpt_value(&whole, &cert.post, s, opts)?.value;
            Ok(EntryBound {
                state: s.clone(),
                consistent: consistent(dir, &engine, &first, &witness, cert.tol),
                first,
                witness: ExtNonNeg::Finite(witness),
                engine,
                certified,
            })
        })
        .collect()
}

/// `supₙ Hₙ(σ)`: the largest member seen before the sequence settles under
/// `policy`, or its limit if that is larger. At most [`N_SUP`] members are
/// inspected.
pub fn sup_h(
    family: &Expr,
    index: &str,
    s: &State,
    policy: &ConvergencePolicy,
) -> EvalResult<ExtNonNeg> {
    let mut incs = Increments::new(policy.window);
    let mut best: Option<BigRational> = None;
    let mut prev: Option<BigRational> = None;
    for n in 0..N_SUP {
        let v = match eval_expr(family, &with_index(s, index, n), policy)? {
            Value::Inf => return Ok(ExtNonNeg::Inf),
            Value::Finite(v) => v,
        };
        if crate::domain::to_f64(&v) > policy.threshold {
            return Ok(ExtNonNeg::Inf);
        }
        if let Some(p) = &prev {
            incs.push(&v - p);
        }
        if best.as_ref().is_none_or(|b| &v > b) {
            best = Some(v.clone());
        }
        if incs.settled(policy.tol) {
            let b = best.expect("at least one member was evaluated");
            return ExtNonNeg::from_rational(b.max(v)).ok_or_else(|| {
                EvalError::NegativeExpectation {
                    state: s.to_string(),
                    value: "sup H".into(),
                }
            });
        }
        prev = Some(v);
    }
    Err(EvalError::SupUndetected {
        state: s.to_string(),
        steps: N_SUP,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::domain::{qi, to_f64};
    use crate::frontend::parse_expression;

    fn e(src: &str) -> Expr {
        parse_expression(src).unwrap()
    }

    fn loop_of(p: &Program) -> (ProbGuard, Program) {
        match p.statements().last() {
            Some(Program::While(g, b)) => (g.clone(), (**b).clone()),
            _ => panic!("no loop"),
        }
    }

    fn grid(var: &str, lo: i64, hi: i64) -> Vec<State> {
        (lo..=hi).map(|v| State::from_pairs([(var, v)])).collect()
    }

    fn sign_walk(inv: &str, family: &str) -> MixedCertificate {
        let (guard, body) = loop_of(&corpus::lookup("sign_walk").unwrap().program());
        MixedCertificate {
            guard,
            body,
            post: IwPairExpr::with_abs_witness(e("x")).unwrap(),
            inv: e(inv),
            witness_inv: e("abs(x) + 1"),
            family: e(family),
            index: "n".into(),
            grid: grid("x", -10, 10),
            n_max: 30,
            tol: 1e-9,
        }
    }

    #[test]
    fn sign_walk_upper() {
        let cert = sign_walk(
            "abs(x) + [x != 0] + x/3 - sign(x)/9",
            "sum(i, 0, n, (abs(x) + [x != 0]*i) / 2^(i+1))",
        );
        let r = check_mixed_upper(&cert, &EvalOptions::default()).unwrap();
        assert!(r.pass, "{:?}", r.failures.first());
        assert!(r.engine_consistent);
        for b in &r.bounds {
            let x = b
                .state
                .get("x")
                .unwrap()
                .to_string()
                .parse::<f64>()
                .unwrap();
            let sign = if x == 0.0 { 0.0 } else { x.signum() };
            let expect = x / 3.0 - sign / 9.0;
            assert!((to_f64(&b.first) - expect).abs() < 1e-9, "{}", b.state);
            assert!((b.sup_h.to_f64() - (x.abs() + (x != 0.0) as i32 as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn amortized_upper_and_wrong_invariant() {
        let (guard, body) = loop_of(&corpus::lookup("amortized_op").unwrap().program());
        let g = "sum(i, 0, inf, abs(F - 3*i) / 2^(i+1))";
        let mut cert = MixedCertificate {
            guard,
            body,
            post: IwPairExpr::with_abs_witness(e("F")).unwrap(),
            inv: e(&format!("{g} + F - 3")),
            witness_inv: e(g),
            family: e("sum(i, 0, n, abs(F - 3*i) / 2^(i+1))"),
            index: "n".into(),
            grid: grid("F", -20, 20),
            n_max: 50,
            tol: 1e-9,
        };
        let opts = EvalOptions::default();
        let r = check_mixed_upper(&cert, &opts).unwrap();
        assert!(r.pass, "{:?}", r.failures.first());
        assert!(r.engine_consistent);
        assert!(r.conditions.iter().all(|c| c.tolerant));
        let at1 = r
            .bounds
            .iter()
            .find(|b| b.state.get("F") == Some(&1.into()))
            .unwrap();
        assert!((to_f64(&at1.first) + 2.0).abs() < 1e-9);
        assert!(at1.witness.to_f64() <= 6.0 + 1e-9);

        cert.inv = e("0");
        let r = check_mixed_upper(&cert, &opts).unwrap();
        assert!(!r.pass);
        assert!(r.bounds.is_empty());
        assert!(r
            .failures
            .iter()
            .any(|f| f.condition == "phi(I) <= I" && f.state == State::from_pairs([("F", 1)])));
    }

    #[test]
    fn degenerate_loop() {
        let cert = MixedCertificate {
            guard: ProbGuard::new(e("0")),
            body: Program::Skip,
            post: IwPairExpr::new(e("x - 2"), e("abs(x) + 2")).unwrap(),
            inv: e("abs(x - 2) + x - 2"),
            witness_inv: e("abs(x) + 2"),
            family: e("abs(x - 2)"),
            index: "n".into(),
            grid: grid("x", -4, 4),
            n_max: 5,
            tol: 1e-9,
        };
        let opts = EvalOptions::default();
        for r in [
            check_mixed_upper(&cert, &opts).unwrap(),
            check_mixed_lower(
                &MixedCertificate {
                    inv: e("abs(x - 2)"),
                    family: e("abs(x - 2) + x - 2"),
                    ..cert.clone()
                },
                &opts,
            )
            .unwrap(),
        ] {
            assert!(r.pass);
            for b in &r.bounds {
                let x: i64 = b.state.get("x").unwrap().try_into().unwrap();
                assert_eq!(b.first, qi(x - 2));
            }
        }
    }

    #[test]
    fn sup_of_families() {
        let p = ConvergencePolicy::series().with_tol(1e-9);
        let s = State::from_pairs([("x", 7)]);
        let h = e("sum(i, 0, n, (abs(x) + [x != 0]*i) / 2^(i+1))");
        assert!((sup_h(&h, "n", &s, &p).unwrap().to_f64() - 8.0).abs() < 1e-9);
        assert_eq!(sup_h(&e("0"), "n", &s, &p).unwrap(), ExtNonNeg::zero());
        let f = State::from_pairs([("F", 0)]);
        let h = e("sum(i, 0, n, abs(F - 3*i) / 2^(i+1))");
        assert!((sup_h(&h, "n", &f, &p).unwrap().to_f64() - 3.0).abs() < 1e-9);
        // A family that peaks early and then decays.
        assert_eq!(
            sup_h(&e("[n = 2] * 5"), "n", &s, &p).unwrap(),
            ExtNonNeg::Finite(qi(5))
        );
        assert!(matches!(
            sup_h(&e("n mod 2"), "n", &s, &p),
            Err(EvalError::SupUndetected { .. })
        ));
    }
}
