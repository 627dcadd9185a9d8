//! Weakest pre-expectation reasoning for probabilistic programs with
//! mixed-sign expectations.
//!
//! Expectations that may take negative values are handled as
//! integrability-witnessing pairs `(f, g)`: `g` is a non-negative expectation
//! with `|f| <= g`, and wherever the pre-expectation of `g` is finite the
//! first component of the transformed pair is the expected value of `f`.
//!
//! ```
//! use iwe::{parse_expression, parse_program, wpt_value, EvalOptions, IwPairExpr, State};
//!
//! let prog = parse_program("F := F + 1; while (1/2) { F := F - 3 }")?;
//! let post = IwPairExpr::with_abs_witness(parse_expression("F")?)?;
//! let out = wpt_value(&prog, &post, &State::from_pairs([("F", 0)]), &EvalOptions::default())?;
//! assert!((iwe::to_f64(out.value.first()) + 2.0).abs() < 1e-9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod check;
pub mod corpus;
pub mod domain;
mod engine;
pub mod error;
pub mod frontend;
pub mod grid;
pub mod invariants;
pub mod oracle;
pub mod wp;
pub mod wpt;

pub use domain::{
    q, qi, to_f64, Convergence, ConvergencePolicy, EvalOptions, ExtNonNeg, IwValue, LoopMode,
    Outcome, State, Value,
};
pub use error::{Error, EvalError, EvalResult};
pub use frontend::{parse_expression, parse_predicate, parse_program, Expr, ProbGuard, Program};
pub use grid::{parse_grid, StateGrid};
pub use invariants::{
    check_mixed_lower, check_mixed_upper, sup_h, CertificateReport, MixedCertificate,
};
pub use oracle::{compare_with_wpt, enumerate, enumerate_from, expected_value, SubDistribution};
pub use wp::{
    verify_lower_omega_invariant, verify_upper_invariant, wp_loop_iterate, wp_symbolic, wp_value,
};
pub use wpt::{
    char_triple_iterate, mixed_iterate, wpt_loop_value, wpt_symbolic, wpt_value, DecompTriple,
    IwPairExpr,
};

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/language.md")]
    mod language {}
    #[doc = include_str!("../../../book/src/classical-wp.md")]
    mod classical_wp {}
    #[doc = include_str!("../../../book/src/iw-pairs.md")]
    mod iw_pairs {}
    #[doc = include_str!("../../../book/src/mixed-transformer.md")]
    mod mixed_transformer {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/convergence.md")]
    mod convergence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
