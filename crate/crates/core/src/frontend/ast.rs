use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Arithmetic expressions over integer program variables.
///
/// Expectations, guards, invariants and assignment right-hand sides all share
/// this type. `Inf` and infinite `Sum`s only make sense in witness positions;
/// the parser rejects them inside programs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(BigRational),
    Var(String),
    Inf,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Mod(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Sign(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    /// Iverson bracket `[pred]`.
    Indicator(Box<Pred>),
    /// `sum(index, lo, hi, body)`; `hi == None` means `inf`.
    Sum {
        index: String,
        lo: Box<Expr>,
        hi: Option<Box<Expr>>,
        body: Box<Expr>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pred {
    Bool(bool),
    Cmp(CmpOp, Expr, Expr),
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

/// A loop or branch guard. Its value at a state must lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProbGuard(pub Expr);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Program {
    Skip,
    Assign(String, Expr),
    Seq(Box<Program>, Box<Program>),
    If(ProbGuard, Box<Program>, Box<Program>),
    While(ProbGuard, Box<Program>),
}

impl CmpOp {
    pub fn holds<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

// Small constructors used throughout the engine and in tests.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rat(n: i64, d: i64) -> Expr {
        Expr::Const(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn zero() -> Expr {
        Expr::Const(BigRational::zero())
    }

    pub fn one() -> Expr {
        Expr::Const(BigRational::one())
    }

    /// Negation; a negated constant becomes a negative constant, as in the
    /// parser.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            e => Expr::Neg(Box::new(e)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn abs(e: Expr) -> Expr {
        Expr::Abs(Box::new(e))
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::Max(Box::new(a), Box::new(b))
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::Min(Box::new(a), Box::new(b))
    }

    pub fn indicator(p: Pred) -> Expr {
        Expr::Indicator(Box::new(p))
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True if the expression mentions `inf` or an infinite series anywhere.
    pub fn has_infinity(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Inf | Expr::Sum { hi: None, .. }) {
                found = true;
            }
        });
        found
    }

    /// True if the expression contains an infinite series (its value is then
    /// only known up to the series tolerance).
    pub fn has_infinite_series(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Sum { hi: None, .. }) {
                found = true;
            }
        });
        found
    }

    pub fn has_series(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Sum { .. }) {
                found = true;
            }
        });
        found
    }

    /// Pre-order traversal, including expressions nested in indicators.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Inf => {}
            Expr::Neg(a) | Expr::Abs(a) | Expr::Sign(a) => a.visit(f),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Mod(a, b)
            | Expr::Pow(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Indicator(p) => p.visit_exprs(f),
            Expr::Sum { lo, hi, body, .. } => {
                lo.visit(f);
                if let Some(hi) = hi {
                    hi.visit(f);
                }
                body.visit(f);
            }
        }
    }
}

impl Pred {
    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            Pred::Bool(_) => {}
            Pred::Cmp(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Pred::Not(p) => p.visit_exprs(f),
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
        }
    }
}

impl ProbGuard {
    pub fn new(e: Expr) -> Self {
        ProbGuard(e)
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }
}

impl Program {
    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    pub fn assign(x: &str, e: Expr) -> Program {
        Program::Assign(x.to_string(), e)
    }

    pub fn ite(g: Expr, a: Program, b: Program) -> Program {
        Program::If(ProbGuard(g), Box::new(a), Box::new(b))
    }

    pub fn while_loop(g: Expr, body: Program) -> Program {
        Program::While(ProbGuard(g), Box::new(body))
    }

    /// Builds a right-nested sequence; an empty list is `skip`.
    pub fn sequence(mut stmts: Vec<Program>) -> Program {
        let Some(mut acc) = stmts.pop() else {
            return Program::Skip;
        };
        while let Some(s) = stmts.pop() {
            acc = Program::seq(s, acc);
        }
        acc
    }

    /// Top-level statements, flattening nested sequences.
    pub fn statements(&self) -> Vec<&Program> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Program, out: &mut Vec<&'a Program>) {
            match p {
                Program::Seq(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn is_loop_free(&self) -> bool {
        match self {
            Program::Skip | Program::Assign(..) => true,
            Program::Seq(a, b) | Program::If(_, a, b) => a.is_loop_free() && b.is_loop_free(),
            Program::While(..) => false,
        }
    }

    /// Every `while` loop in source order.
    pub fn loops(&self) -> Vec<&Program> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Program, out: &mut Vec<&'a Program>) {
            match p {
                Program::Skip | Program::Assign(..) => {}
                Program::Seq(a, b) | Program::If(_, a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Program::While(_, body) => {
                    out.push(p);
                    go(body, out);
                }
            }
        }
        go(self, &mut out);
        out
    }
}

/// Anything with free variables.
pub trait FreeVars {
    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>);

    fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }
}

pub fn free_variables<T: FreeVars + ?Sized>(t: &T) -> BTreeSet<String> {
    t.free_variables()
}

impl FreeVars for Expr {
    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) | Expr::Inf => {}
            Expr::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Expr::Neg(a) | Expr::Abs(a) | Expr::Sign(a) => a.collect_free(bound, out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Mod(a, b)
            | Expr::Pow(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Indicator(p) => p.collect_free(bound, out),
            Expr::Sum {
                index,
                lo,
                hi,
                body,
            } => {
                lo.collect_free(bound, out);
                if let Some(hi) = hi {
                    hi.collect_free(bound, out);
                }
                bound.push(index.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }
}

impl FreeVars for Pred {
    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Pred::Bool(_) => {}
            Pred::Cmp(_, a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Pred::Not(p) => p.collect_free(bound, out),
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
        }
    }
}

impl FreeVars for Program {
    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Program::Skip => {}
            Program::Assign(x, e) => {
                out.insert(x.clone());
                e.collect_free(bound, out);
            }
            Program::Seq(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Program::If(g, a, b) => {
                g.0.collect_free(bound, out);
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Program::While(g, body) => {
                g.0.collect_free(bound, out);
                body.collect_free(bound, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_index_is_bound() {
        let e = Expr::Sum {
            index: "i".into(),
            lo: Box::new(Expr::zero()),
            hi: Some(Box::new(Expr::var("n"))),
            body: Box::new(Expr::mul(Expr::var("i"), Expr::var("x"))),
        };
        let fv: Vec<_> = e.free_variables().into_iter().collect();
        assert_eq!(fv, vec!["n".to_string(), "x".to_string()]);
    }

    #[test]
    fn sequence_flattens_back() {
        let p = Program::sequence(vec![
            Program::Skip,
            Program::assign("x", Expr::int(1)),
            Program::assign("y", Expr::int(2)),
        ]);
        assert_eq!(p.statements().len(), 3);
        assert!(p.is_loop_free());
        assert_eq!(
            p.free_variables().into_iter().collect::<Vec<_>>(),
            vec!["x", "y"]
        );
    }
}
