//! Exact operational semantics by exhaustive enumeration.
//!
//! Programs are flattened into an arena and run by a small-step machine whose
//! configurations are (continuation stack, state). Each round advances every
//! configuration to its next guard, evaluates that guard (one unit of depth)
//! and splits the mass. Identical configurations are merged.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::domain::{
    eval_assignment, eval_expr, eval_finite, eval_guard, rat_from_f64, rational_str, to_f64,
    ConvergencePolicy, EvalOptions, ExtNonNeg, IwValue, State, Value,
};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{Expr, ProbGuard, Program};
use crate::wpt::{wpt_value, IwPairExpr};

/// Outcome of running a program for a bounded number of guard evaluations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubDistribution {
    pub terminal: Vec<Mass>,
    #[serde(with = "rational_str")]
    pub residual: BigRational,
    /// Guard evaluations spent along the longest explored path.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mass {
    pub state: State,
    #[serde(with = "rational_str")]
    pub mass: BigRational,
}

impl SubDistribution {
    pub fn terminal_mass(&self) -> BigRational {
        self.terminal.iter().map(|m| &m.mass).sum()
    }

    pub fn mass_of(&self, s: &State) -> BigRational {
        self.terminal
            .iter()
            .find(|m| &m.state == s)
            .map_or_else(BigRational::zero, |m| m.mass.clone())
    }
}

enum Node<'p> {
    Skip,
    Assign(&'p str, &'p Expr),
    Seq(usize, usize),
    If(&'p ProbGuard, usize, usize),
    While(&'p ProbGuard, usize),
}

struct Arena<'p> {
    nodes: Vec<Node<'p>>,
}

impl<'p> Arena<'p> {
    fn build(prog: &'p Program) -> (Self, usize) {
        let mut arena = Arena { nodes: Vec::new() };
        let root = arena.add(prog);
        (arena, root)
    }

    fn add(&mut self, prog: &'p Program) -> usize {
        let node = match prog {
            Program::Skip => Node::Skip,
            Program::Assign(x, e) => Node::Assign(x, e),
            Program::Seq(a, b) => Node::Seq(self.add(a), self.add(b)),
            Program::If(g, a, b) => Node::If(g, self.add(a), self.add(b)),
            Program::While(g, b) => Node::While(g, self.add(b)),
        };
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

type Config = (Vec<usize>, State);

/// Explores `prog` from a finite-support initial distribution, spending at
/// most `depth` guard evaluations on every path.
pub fn enumerate(
    prog: &Program,
    initial: &[(State, BigRational)],
    depth: usize,
    policy: &ConvergencePolicy,
) -> EvalResult<SubDistribution> {
    let total: BigRational = initial.iter().map(|(_, m)| m).sum();
    if !total.is_one() || initial.iter().any(|(_, m)| m.is_negative()) {
        return Err(EvalError::Precondition(format!(
            "initial masses must be non-negative and sum to 1, got {total}"
        )));
    }
    let (arena, root) = Arena::build(prog);
    let mut live: BTreeMap<Config, BigRational> = BTreeMap::new();
    for (s, m) in initial {
        if m.is_positive() {
            *live
                .entry((vec![root], s.clone()))
                .or_insert_with(BigRational::zero) += m;
        }
    }
    let mut terminal: BTreeMap<State, BigRational> = BTreeMap::new();
    let mut used = 0;

    loop {
        // Run every configuration up to its next guard.
        let mut waiting: BTreeMap<Config, BigRational> = BTreeMap::new();
        for ((mut stack, mut s), m) in std::mem::take(&mut live) {
            loop {
                match stack.last().map(|&i| &arena.nodes[i]) {
                    None => {
                        *terminal.entry(s).or_insert_with(BigRational::zero) += m;
                        break;
                    }
                    Some(Node::Skip) => {
                        stack.pop();
                    }
                    Some(Node::Assign(x, e)) => {
                        let v = eval_assignment(x, e, &s, policy)?;
                        s.insert(x, v);
                        stack.pop();
                    }
                    Some(&Node::Seq(a, b)) => {
                        stack.pop();
                        stack.push(b);
                        stack.push(a);
                    }
                    Some(Node::If(..)) | Some(Node::While(..)) => {
                        *waiting.entry((stack, s)).or_insert_with(BigRational::zero) += m;
                        break;
                    }
                }
            }
        }
        if waiting.is_empty() || used == depth {
            let residual = waiting.values().sum();
            return Ok(SubDistribution {
                terminal: terminal
                    .into_iter()
                    .map(|(state, mass)| Mass { state, mass })
                    .collect(),
                residual,
                depth: used,
            });
        }
        used += 1;
        for ((stack, s), m) in waiting {
            let top = *stack.last().expect("waiting configurations sit at a guard");
            let (g, yes, no): (&ProbGuard, Vec<usize>, Vec<usize>) = match &arena.nodes[top] {
                Node::If(g, a, b) => {
                    let mut yes = stack.clone();
                    *yes.last_mut().unwrap() = *a;
                    let mut no = stack;
                    *no.last_mut().unwrap() = *b;
                    (g, yes, no)
                }
                Node::While(g, body) => {
                    let mut yes = stack.clone();
                    yes.push(*body);
                    let mut no = stack;
                    no.pop();
                    (g, yes, no)
                }
                _ => unreachable!(),
            };
            let p = eval_guard(g, &s, policy)?;
            let q = BigRational::one() - &p;
            if p.is_positive() {
                *live
                    .entry((yes, s.clone()))
                    .or_insert_with(BigRational::zero) += &m * &p;
            }
            if q.is_positive() {
                *live.entry((no, s)).or_insert_with(BigRational::zero) += &m * &q;
            }
        }
    }
}

/// [`enumerate`] from the point mass at `s`.
pub fn enumerate_from(
    prog: &Program,
    s: &State,
    depth: usize,
    policy: &ConvergencePolicy,
) -> EvalResult<SubDistribution> {
    enumerate(prog, &[(s.clone(), BigRational::one())], depth, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    IntegrableSoFar,
    Diverging,
    Undetermined,
}

/// Partial expectations of `f⁺ = max(f, 0)` and `f⁻ = -min(f, 0)` over the
/// terminal mass of a sub-distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JordanReport {
    #[serde(with = "rational_str")]
    pub e_plus: BigRational,
    #[serde(with = "rational_str")]
    pub e_minus: BigRational,
    #[serde(with = "rational_str")]
    pub e_abs: BigRational,
    #[serde(with = "rational_str")]
    pub residual: BigRational,
    /// Largest `|f|` over the terminal support.
    #[serde(with = "rational_str")]
    pub max_abs: BigRational,
    pub verdict: Verdict,
}

impl JordanReport {
    pub fn expectation(&self) -> BigRational {
        &self.e_plus - &self.e_minus
    }
}

pub fn expected_value(
    d: &SubDistribution,
    f: &Expr,
    threshold: f64,
    policy: &ConvergencePolicy,
) -> EvalResult<JordanReport> {
    if f.has_infinity() || f.has_infinite_series() {
        return Err(EvalError::Precondition(
            "oracle expectations must be finite and series-free".into(),
        ));
    }
    let mut e_plus = BigRational::zero();
    let mut e_minus = BigRational::zero();
    let mut max_abs = BigRational::zero();
    for Mass { state, mass } in &d.terminal {
        let v = eval_finite(f, state, policy)?;
        if v.is_positive() {
            e_plus += mass * &v;
        } else {
            e_minus -= mass * &v;
        }
        max_abs = max_abs.max(v.abs());
    }
    let e_abs = &e_plus + &e_minus;
    let verdict = if d.residual.is_one() {
        Verdict::Undetermined
    } else if to_f64(&e_abs) > threshold {
        Verdict::Diverging
    } else {
        Verdict::IntegrableSoFar
    };
    Ok(JordanReport {
        e_plus,
        e_minus,
        e_abs,
        residual: d.residual.clone(),
        max_abs,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchStatus {
    Match,
    Mismatch,
    /// The transformer reports an infinite witness, so there is no expected
    /// value to compare.
    NotIntegrable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub state: State,
    pub wpt: IwValue,
    pub oracle: JordanReport,
    /// Expected value of the witness expression over the terminal mass.
    pub oracle_witness: ExtNonNeg,
    /// Equality was demanded exactly (loop-free program, no residual).
    pub exact: bool,
    /// Largest admissible `|wpt first - oracle expectation|`.
    pub bound: f64,
    pub difference: f64,
    pub status: MatchStatus,
}

/// Runs the oracle and the transformer on the same input and compares them.
/// Loop-free programs explored to completion must agree exactly, on the first
/// component and on the witness; otherwise the first components must agree
/// within `tol + residual * max |f|`.
pub fn compare_with_wpt(
    prog: &Program,
    p: &IwPairExpr,
    s: &State,
    depth: usize,
    tol: f64,
    opts: &EvalOptions,
) -> EvalResult<OracleComparison> {
    let policy = &opts.series;
    let d = enumerate_from(prog, s, depth, policy)?;
    let oracle = expected_value(&d, &p.first, opts.loops.threshold, policy)?;
    let mut oracle_witness = ExtNonNeg::zero();
    for Mass { state, mass } in &d.terminal {
        let g = match eval_expr(&p.witness, state, policy)? {
            Value::Inf => ExtNonNeg::Inf,
            Value::Finite(g) => ExtNonNeg::Finite(g * mass),
        };
        oracle_witness = oracle_witness.add(&g);
    }
    let wpt = wpt_value(prog, p, s, opts)?.value;
    let exact = prog.is_loop_free() && d.residual.is_zero();
    let diff = wpt.first() - oracle.expectation();
    let bound = tol + to_f64(&(&d.residual * &oracle.max_abs));
    let status = if !wpt.is_integrable() {
        MatchStatus::NotIntegrable
    } else if exact {
        if diff.is_zero() && wpt.witness() == &oracle_witness {
            MatchStatus::Match
        } else {
            MatchStatus::Mismatch
        }
    } else if diff.abs() <= rat_from_f64(bound) {
        MatchStatus::Match
    } else {
        MatchStatus::Mismatch
    };
    Ok(OracleComparison {
        state: s.clone(),
        difference: to_f64(&diff.abs()),
        wpt,
        oracle,
        oracle_witness,
        exact,
        bound,
        status,
    })
}
