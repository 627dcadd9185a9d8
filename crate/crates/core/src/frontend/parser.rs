//! Recursive-descent parser for programs, expressions and predicates.
//!
//! Two literal folds happen while parsing: a minus applied to a constant and a
//! division of two constants (with a non-zero divisor) become a single
//! constant. That keeps `3/4` and `-2` atomic so printing and re-parsing is
//! the identity on parsed trees.

use num_traits::Zero;

use super::ast::{CmpOp, Expr, Pred, ProbGuard, Program};
use super::lexer::{tokenize, ParseError, ParseResult, Span, Tok, Token};

const KEYWORDS: &[&str] = &[
    "skip", "if", "else", "while", "sum", "inf", "and", "or", "not", "true", "false", "mod", "abs",
    "sign", "min", "max", "pow",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn parse_program(src: &str) -> ParseResult<Program> {
    let mut p = Parser::new(src)?;
    let prog = p.program()?;
    p.expect_eof()?;
    Ok(prog)
}

/// Parses an expectation, witness or invariant. `inf` and infinite series are
/// allowed here.
pub fn parse_expression(src: &str) -> ParseResult<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_predicate(src: &str) -> ParseResult<Pred> {
    let mut p = Parser::new(src)?;
    let e = p.pred()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> ParseResult<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, msg: impl Into<String>) -> ParseResult<T> {
        Err(ParseError::new(self.span(), msg))
    }

    fn expect(&mut self, t: Tok) -> ParseResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.error(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn expect_eof(&self) -> ParseResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error(format!("unexpected {}", self.peek()))
        }
    }

    fn ident(&mut self) -> ParseResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) => self.error(format!("`{s}` is reserved")),
            other => self.error(format!("expected identifier, found {other}")),
        }
    }

    // ---- programs ----

    fn program(&mut self) -> ParseResult<Program> {
        let mut stmts = vec![self.stmt()?];
        while self.eat(&Tok::Semi) {
            if matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                break;
            }
            stmts.push(self.stmt()?);
        }
        Ok(Program::sequence(stmts))
    }

    fn block(&mut self) -> ParseResult<Program> {
        self.expect(Tok::LBrace)?;
        if self.eat(&Tok::RBrace) {
            return Ok(Program::Skip);
        }
        let p = self.program()?;
        self.expect(Tok::RBrace)?;
        Ok(p)
    }

    fn stmt(&mut self) -> ParseResult<Program> {
        if self.eat_kw("skip") {
            return Ok(Program::Skip);
        }
        if self.eat_kw("if") {
            let g = self.guard()?;
            let a = self.block()?;
            let b = if self.eat_kw("else") {
                if self.is_kw("if") {
                    self.stmt()?
                } else {
                    self.block()?
                }
            } else {
                Program::Skip
            };
            return Ok(Program::If(g, Box::new(a), Box::new(b)));
        }
        if self.eat_kw("while") {
            let g = self.guard()?;
            let body = self.block()?;
            return Ok(Program::While(g, Box::new(body)));
        }
        if let Tok::Ident(_) = self.peek() {
            let name = self.ident()?;
            self.expect(Tok::Assign)?;
            let span = self.span();
            let e = self.expr()?;
            program_expr_ok(&e, span)?;
            return Ok(Program::Assign(name, e));
        }
        self.error(format!("expected a statement, found {}", self.peek()))
    }

    /// `( pred )` or `( expr )`; a bare predicate becomes its indicator.
    fn guard(&mut self) -> ParseResult<ProbGuard> {
        self.expect(Tok::LParen)?;
        let span = self.span();
        let start = self.pos;
        let e = match self.pred() {
            Ok(p) if *self.peek() == Tok::RParen => Expr::indicator(p),
            _ => {
                self.pos = start;
                self.expr()?
            }
        };
        program_expr_ok(&e, span)?;
        self.expect(Tok::RParen)?;
        Ok(ProbGuard(e))
    }

    // ---- expressions ----

    fn expr(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = Expr::add(lhs, self.term()?);
            } else if self.eat(&Tok::Minus) {
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> ParseResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                lhs = Expr::mul(lhs, self.unary()?);
            } else if self.eat(&Tok::Slash) {
                let rhs = self.unary()?;
                lhs = match (&lhs, &rhs) {
                    (Expr::Const(a), Expr::Const(b)) if !b.is_zero() => Expr::Const(a / b),
                    _ => Expr::div(lhs, rhs),
                };
            } else if self.eat_kw("mod") {
                lhs = Expr::Mod(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> ParseResult<Expr> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> ParseResult<Expr> {
        let base = self.atom()?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> ParseResult<Expr> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let p = self.pred()?;
                self.expect(Tok::RBracket)?;
                Ok(Expr::indicator(p))
            }
            Tok::Ident(name) => {
                if name == "inf" {
                    self.bump();
                    return Ok(Expr::Inf);
                }
                if *self.peek_at(1) == Tok::LParen && is_keyword(&name) {
                    return self.call(&name);
                }
                Ok(Expr::Var(self.ident()?))
            }
            other => self.error(format!("expected an expression, found {other}")),
        }
    }

    fn call(&mut self, name: &str) -> ParseResult<Expr> {
        let span = self.span();
        self.bump();
        self.expect(Tok::LParen)?;
        let e = match name {
            "abs" => Expr::Abs(Box::new(self.expr()?)),
            "sign" => Expr::Sign(Box::new(self.expr()?)),
            "min" | "max" | "pow" | "mod" => {
                let a = Box::new(self.expr()?);
                self.expect(Tok::Comma)?;
                let b = Box::new(self.expr()?);
                match name {
                    "min" => Expr::Min(a, b),
                    "max" => Expr::Max(a, b),
                    "pow" => Expr::Pow(a, b),
                    _ => Expr::Mod(a, b),
                }
            }
            "sum" => {
                let index = self.ident()?;
                self.expect(Tok::Comma)?;
                let lo = Box::new(self.expr()?);
                self.expect(Tok::Comma)?;
                let hi = if self.is_kw("inf") && *self.peek_at(1) == Tok::Comma {
                    self.bump();
                    None
                } else {
                    Some(Box::new(self.expr()?))
                };
                self.expect(Tok::Comma)?;
                let body = Box::new(self.expr()?);
                Expr::Sum {
                    index,
                    lo,
                    hi,
                    body,
                }
            }
            _ => return Err(ParseError::new(span, format!("`{name}` is not a function"))),
        };
        self.expect(Tok::RParen)?;
        Ok(e)
    }

    // ---- predicates ----

    fn pred(&mut self) -> ParseResult<Pred> {
        let mut lhs = self.conj()?;
        while self.eat_kw("or") || self.eat(&Tok::OrOr) {
            lhs = Pred::Or(Box::new(lhs), Box::new(self.conj()?));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> ParseResult<Pred> {
        let mut lhs = self.negation()?;
        while self.eat_kw("and") || self.eat(&Tok::AndAnd) {
            lhs = Pred::And(Box::new(lhs), Box::new(self.negation()?));
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> ParseResult<Pred> {
        if self.eat_kw("not") || self.eat(&Tok::Bang) {
            return Ok(Pred::Not(Box::new(self.negation()?)));
        }
        if self.eat_kw("true") {
            return Ok(Pred::Bool(true));
        }
        if self.eat_kw("false") {
            return Ok(Pred::Bool(false));
        }
        if *self.peek() == Tok::LParen {
            // `(x + 1) < 2` and `(x < 1) or ...` both start with a parenthesis.
            let start = self.pos;
            if let Ok(c) = self.comparison() {
                return Ok(c);
            }
            self.pos = start;
            self.bump();
            let p = self.pred()?;
            self.expect(Tok::RParen)?;
            return Ok(p);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> ParseResult<Pred> {
        let span = self.span();
        let a = self.expr()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            other => return self.error(format!("expected a comparison, found {other}")),
        };
        self.bump();
        let b = self.expr()?;
        if a.has_series() || b.has_series() || a.has_infinity() || b.has_infinity() {
            return Err(ParseError::new(
                span,
                "comparison operands may not contain `inf` or `sum`",
            ));
        }
        Ok(Pred::Cmp(op, a, b))
    }
}

fn program_expr_ok(e: &Expr, span: Span) -> ParseResult<()> {
    if e.has_series() || e.has_infinity() {
        return Err(ParseError::new(
            span,
            "`inf` and `sum` may not appear inside programs",
        ));
    }
    Ok(())
}
