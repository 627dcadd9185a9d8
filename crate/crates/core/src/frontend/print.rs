use std::fmt::{self, Write};

use num_traits::Signed;

use super::ast::{Expr, Pred, Program};

// Binding strength of each printed form; an operand is parenthesised when it
// binds looser than its position requires.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if !c.is_integer() => PRODUCT,
        Expr::Const(c) if c.is_negative() => UNARY,
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) | Expr::Mod(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Pow(..) => POWER,
        _ => ATOM,
    }
}

fn write_at(out: &mut String, e: &Expr, min: u8) {
    if level(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn binary(out: &mut String, a: &Expr, op: &str, b: &Expr, lvl: u8) {
    write_at(out, a, lvl);
    out.push_str(op);
    write_at(out, b, lvl + 1);
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Const(c) => {
            let _ = write!(out, "{c}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Inf => out.push_str("inf"),
        Expr::Neg(a) => {
            out.push('-');
            write_at(out, a, UNARY);
        }
        Expr::Add(a, b) => binary(out, a, " + ", b, SUM),
        Expr::Sub(a, b) => binary(out, a, " - ", b, SUM),
        Expr::Mul(a, b) => binary(out, a, " * ", b, PRODUCT),
        Expr::Div(a, b) => binary(out, a, " / ", b, PRODUCT),
        Expr::Mod(a, b) => binary(out, a, " mod ", b, PRODUCT),
        Expr::Pow(a, b) => {
            write_at(out, a, ATOM);
            out.push('^');
            write_at(out, b, UNARY);
        }
        Expr::Abs(a) => call(out, "abs", &[a]),
        Expr::Sign(a) => call(out, "sign", &[a]),
        Expr::Min(a, b) => call(out, "min", &[a, b]),
        Expr::Max(a, b) => call(out, "max", &[a, b]),
        Expr::Indicator(p) => {
            out.push('[');
            write_pred(out, p, 1);
            out.push(']');
        }
        Expr::Sum {
            index,
            lo,
            hi,
            body,
        } => {
            let _ = write!(out, "sum({index}, ");
            write_expr(out, lo);
            out.push_str(", ");
            match hi {
                Some(hi) => write_expr(out, hi),
                None => out.push_str("inf"),
            }
            out.push_str(", ");
            write_expr(out, body);
            out.push(')');
        }
    }
}

fn call(out: &mut String, name: &str, args: &[&Expr]) {
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a);
    }
    out.push(')');
}

fn pred_level(p: &Pred) -> u8 {
    match p {
        Pred::Or(..) => 1,
        Pred::And(..) => 2,
        _ => 3,
    }
}

fn write_pred(out: &mut String, p: &Pred, min: u8) {
    if pred_level(p) < min {
        out.push('(');
        write_pred(out, p, 1);
        out.push(')');
        return;
    }
    match p {
        Pred::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Pred::Cmp(op, a, b) => {
            write_expr(out, a);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b);
        }
        Pred::Not(q) => {
            out.push_str("not ");
            write_pred(out, q, 3);
        }
        Pred::And(a, b) => {
            write_pred(out, a, 2);
            out.push_str(" and ");
            write_pred(out, b, 3);
        }
        Pred::Or(a, b) => {
            write_pred(out, a, 1);
            out.push_str(" or ");
            write_pred(out, b, 2);
        }
    }
}

fn write_guard(out: &mut String, g: &Expr) {
    match g {
        Expr::Indicator(p) => write_pred(out, p, 1),
        other => write_expr(out, other),
    }
}

fn write_program(out: &mut String, p: &Program, indent: usize) {
    let pad = "  ".repeat(indent);
    let stmts = p.statements();
    for (i, s) in stmts.iter().enumerate() {
        out.push_str(&pad);
        match s {
            Program::Skip => out.push_str("skip"),
            Program::Assign(x, e) => {
                let _ = write!(out, "{x} := ");
                write_expr(out, e);
            }
            Program::If(g, a, b) => {
                out.push_str("if (");
                write_guard(out, &g.0);
                out.push_str(") {\n");
                write_program(out, a, indent + 1);
                let _ = write!(out, "\n{pad}}} else {{\n");
                write_program(out, b, indent + 1);
                let _ = write!(out, "\n{pad}}}");
            }
            Program::While(g, body) => {
                out.push_str("while (");
                write_guard(out, &g.0);
                out.push_str(") {\n");
                write_program(out, body, indent + 1);
                let _ = write!(out, "\n{pad}}}");
            }
            Program::Seq(..) => unreachable!("statements() flattens sequences"),
        }
        if i + 1 < stmts.len() {
            out.push_str(";\n");
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_pred(&mut s, self, 1);
        f.write_str(&s)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_program(&mut s, self, 0);
        f.write_str(&s)
    }
}
