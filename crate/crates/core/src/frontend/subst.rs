//! Capture-avoiding substitution and constant folding.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ast::{Expr, FreeVars, Pred};

/// `e[var / repl]`. Series indices that would capture a free variable of
/// `repl` are renamed first.
pub fn substitute(e: &Expr, var: &str, repl: &Expr) -> Expr {
    let repl_fv = repl.free_variables();
    subst_expr(e, var, repl, &repl_fv)
}

pub fn substitute_pred(p: &Pred, var: &str, repl: &Expr) -> Pred {
    let repl_fv = repl.free_variables();
    subst_pred(p, var, repl, &repl_fv)
}

fn subst_expr(e: &Expr, var: &str, repl: &Expr, fv: &BTreeSet<String>) -> Expr {
    let go = |a: &Expr| Box::new(subst_expr(a, var, repl, fv));
    match e {
        Expr::Const(_) | Expr::Inf => e.clone(),
        Expr::Var(v) if v == var => repl.clone(),
        Expr::Var(_) => e.clone(),
        Expr::Neg(a) => Expr::Neg(go(a)),
        Expr::Abs(a) => Expr::Abs(go(a)),
        Expr::Sign(a) => Expr::Sign(go(a)),
        Expr::Add(a, b) => Expr::Add(go(a), go(b)),
        Expr::Sub(a, b) => Expr::Sub(go(a), go(b)),
        Expr::Mul(a, b) => Expr::Mul(go(a), go(b)),
        Expr::Div(a, b) => Expr::Div(go(a), go(b)),
        Expr::Mod(a, b) => Expr::Mod(go(a), go(b)),
        Expr::Pow(a, b) => Expr::Pow(go(a), go(b)),
        Expr::Min(a, b) => Expr::Min(go(a), go(b)),
        Expr::Max(a, b) => Expr::Max(go(a), go(b)),
        Expr::Indicator(p) => Expr::Indicator(Box::new(subst_pred(p, var, repl, fv))),
        Expr::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let lo = go(lo);
            let hi = hi.as_ref().map(|h| go(h));
            if index == var {
                return Expr::Sum {
                    index: index.clone(),
                    lo,
                    hi,
                    body: body.clone(),
                };
            }
            let (index, body) = if fv.contains(index) {
                let mut avoid = fv.clone();
                avoid.extend(body.free_variables());
                avoid.insert(var.to_string());
                let fresh = fresh_name(index, &avoid);
                let renamed = substitute(body, index, &Expr::Var(fresh.clone()));
                (fresh, renamed)
            } else {
                (index.clone(), (**body).clone())
            };
            Expr::Sum {
                index,
                lo,
                hi,
                body: Box::new(subst_expr(&body, var, repl, fv)),
            }
        }
    }
}

fn subst_pred(p: &Pred, var: &str, repl: &Expr, fv: &BTreeSet<String>) -> Pred {
    match p {
        Pred::Bool(_) => p.clone(),
        Pred::Cmp(op, a, b) => Pred::Cmp(
            *op,
            subst_expr(a, var, repl, fv),
            subst_expr(b, var, repl, fv),
        ),
        Pred::Not(q) => Pred::Not(Box::new(subst_pred(q, var, repl, fv))),
        Pred::And(a, b) => Pred::And(
            Box::new(subst_pred(a, var, repl, fv)),
            Box::new(subst_pred(b, var, repl, fv)),
        ),
        Pred::Or(a, b) => Pred::Or(
            Box::new(subst_pred(a, var, repl, fv)),
            Box::new(subst_pred(b, var, repl, fv)),
        ),
    }
}

pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    (1..)
        .map(|k| format!("{base}_{k}"))
        .find(|c| !avoid.contains(c))
        .unwrap()
}

/// Folds operations whose operands are all constants, plus the unit laws
/// `0 + e`, `e + 0`, `e - 0`, `1 * e`, `e * 1`, `e / 1` and the left-zero law
/// `0 * e`. Division by a constant zero is left in place so it still fails at
/// evaluation time.
pub fn fold_constants(e: &Expr) -> Expr {
    use Expr::*;
    match e {
        Const(_) | Var(_) | Inf => e.clone(),
        Neg(a) => match fold_constants(a) {
            Const(c) => Const(-c),
            a => Neg(Box::new(a)),
        },
        Abs(a) => match fold_constants(a) {
            Const(c) => Const(c.abs()),
            a => Abs(Box::new(a)),
        },
        Sign(a) => match fold_constants(a) {
            Const(c) => Const(c.signum()),
            a => Sign(Box::new(a)),
        },
        Add(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) => Const(x + y),
            (Const(x), b) if x.is_zero() => b,
            (a, Const(y)) if y.is_zero() => a,
            (a, b) => Add(Box::new(a), Box::new(b)),
        },
        Sub(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) => Const(x - y),
            (a, Const(y)) if y.is_zero() => a,
            (a, b) => Sub(Box::new(a), Box::new(b)),
        },
        Mul(a, b) => match fold_constants(a) {
            Const(x) if x.is_zero() => Const(x),
            a => match (a, fold_constants(b)) {
                (Const(x), Const(y)) => Const(x * y),
                (Const(x), b) if x.is_one() => b,
                (a, Const(y)) if y.is_one() => a,
                (a, b) => Mul(Box::new(a), Box::new(b)),
            },
        },
        Div(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) if !y.is_zero() => Const(x / y),
            (a, Const(y)) if y.is_one() => a,
            (a, b) => Div(Box::new(a), Box::new(b)),
        },
        Mod(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) if !y.is_zero() => Const(rat_mod(&x, &y)),
            (a, b) => Mod(Box::new(a), Box::new(b)),
        },
        Pow(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) if small_nat(&y).is_some() => {
                Const(num_traits::pow(x, small_nat(&y).unwrap()))
            }
            (a, b) => Pow(Box::new(a), Box::new(b)),
        },
        Min(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) => Const(x.min(y)),
            (a, b) => Min(Box::new(a), Box::new(b)),
        },
        Max(a, b) => match (fold_constants(a), fold_constants(b)) {
            (Const(x), Const(y)) => Const(x.max(y)),
            (a, b) => Max(Box::new(a), Box::new(b)),
        },
        Indicator(p) => {
            let p = fold_pred(p);
            match p {
                Pred::Bool(true) => Const(BigRational::one()),
                Pred::Bool(false) => Const(BigRational::zero()),
                p => Indicator(Box::new(p)),
            }
        }
        Sum {
            index,
            lo,
            hi,
            body,
        } => Sum {
            index: index.clone(),
            lo: Box::new(fold_constants(lo)),
            hi: hi.as_ref().map(|h| Box::new(fold_constants(h))),
            body: Box::new(fold_constants(body)),
        },
    }
}

pub fn fold_pred(p: &Pred) -> Pred {
    match p {
        Pred::Bool(_) => p.clone(),
        Pred::Cmp(op, a, b) => match (fold_constants(a), fold_constants(b)) {
            (Expr::Const(x), Expr::Const(y)) => Pred::Bool(op.holds(&x, &y)),
            (a, b) => Pred::Cmp(*op, a, b),
        },
        Pred::Not(q) => match fold_pred(q) {
            Pred::Bool(b) => Pred::Bool(!b),
            q => Pred::Not(Box::new(q)),
        },
        Pred::And(a, b) => match (fold_pred(a), fold_pred(b)) {
            (Pred::Bool(false), _) | (_, Pred::Bool(false)) => Pred::Bool(false),
            (Pred::Bool(true), q) | (q, Pred::Bool(true)) => q,
            (a, b) => Pred::And(Box::new(a), Box::new(b)),
        },
        Pred::Or(a, b) => match (fold_pred(a), fold_pred(b)) {
            (Pred::Bool(true), _) | (_, Pred::Bool(true)) => Pred::Bool(true),
            (Pred::Bool(false), q) | (q, Pred::Bool(false)) => q,
            (a, b) => Pred::Or(Box::new(a), Box::new(b)),
        },
    }
}

/// `a - b * floor(a / b)`; the result has the sign of `b`.
pub fn rat_mod(a: &BigRational, b: &BigRational) -> BigRational {
    a - b * (a / b).floor()
}

fn small_nat(r: &BigRational) -> Option<usize> {
    if !r.is_integer() || r.is_negative() {
        return None;
    }
    r.to_integer().to_usize().filter(|&n| n <= 64)
}
