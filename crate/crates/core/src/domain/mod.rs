//! Values, states and the integrability-witnessing domain.

mod eval;
mod iw;
mod policy;
mod report;
mod state;
mod value;

pub use eval::{eval_assignment, eval_expr, eval_finite, eval_guard, eval_pred};
pub use iw::{limit, IwValue, LimitOutcome};
pub(crate) use policy::Increments;
pub use policy::{ConvergencePolicy, EvalOptions, LoopMode};
pub use report::{Convergence, IwReport, IwRow, LoopTrace, Outcome};
pub use state::State;
pub use value::{q, qi, rat_from_f64, rational_str, to_f64, ExtNonNeg, Value};
