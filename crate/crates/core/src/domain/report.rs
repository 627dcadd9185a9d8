use serde::Serialize;

use super::iw::IwValue;
use super::state::State;
use super::value::ExtNonNeg;

/// How the loops met during one evaluation were resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Convergence {
    /// Largest number of unfoldings spent on any single loop evaluation.
    pub iterations: usize,
    /// Number of loop evaluations (a loop inside a loop body is evaluated once
    /// per state it is reached in).
    pub loop_evaluations: usize,
    /// Magnitude of the last increment seen by the convergence check.
    pub last_increment: Option<f64>,
    /// Some loop was resolved to `inf`.
    pub divergent: bool,
    /// Some verdict relied on the tolerance, the threshold or the iteration
    /// cap rather than on an exact fixed point.
    pub heuristic: bool,
}

/// Values of `iterate` for one loop evaluation, one row per unfolding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopTrace {
    pub state: State,
    pub rows: Vec<Vec<ExtNonNeg>>,
}

/// A value together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome<V> {
    pub value: V,
    pub convergence: Convergence,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<LoopTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IwRow {
    pub state: State,
    pub value: IwValue,
    pub convergence: Convergence,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<LoopTrace>,
}

/// Per-state mixed-sign results over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IwReport {
    pub rows: Vec<IwRow>,
}

impl IwRow {
    pub fn from_outcome(state: State, o: Outcome<IwValue>) -> Self {
        IwRow {
            state,
            value: o.value,
            convergence: o.convergence,
            traces: o.traces,
        }
    }
}
