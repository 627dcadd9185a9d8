//! Surface language: lexer, parser, printer and syntactic operations.

mod ast;
mod lexer;
mod parser;
mod print;
mod subst;

pub use ast::{free_variables, CmpOp, Expr, FreeVars, Pred, ProbGuard, Program};
pub use lexer::{ParseError, ParseResult, Span};
pub use parser::{is_keyword, parse_expression, parse_predicate, parse_program};
pub use subst::{fold_constants, fold_pred, fresh_name, rat_mod, substitute, substitute_pred};
