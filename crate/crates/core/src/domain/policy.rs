use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::value::to_f64;

/// When a series or a loop iteration is considered settled.
///
/// A sequence has converged once `window` consecutive increments are each
/// below `tol` and the geometric tail estimate from the last two increments is
/// below `tol` too. It is declared divergent once it exceeds `threshold`. Both
/// verdicts are heuristics on a finite prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePolicy {
    pub tol: f64,
    pub threshold: f64,
    pub window: usize,
    pub max_steps: usize,
}

impl ConvergencePolicy {
    pub fn series() -> Self {
        ConvergencePolicy {
            tol: 1e-12,
            threshold: 1e9,
            window: 8,
            max_steps: 10_000,
        }
    }

    pub fn loops() -> Self {
        ConvergencePolicy {
            max_steps: 200,
            ..Self::series()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        Self::series()
    }
}

/// How loops are resolved during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    /// Iterate until the convergence policy decides.
    Limit,
    /// Stop after exactly `n` unfoldings (the `n`-th iterate from zero).
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub series: ConvergencePolicy,
    pub loops: ConvergencePolicy,
    pub loop_mode: LoopMode,
    /// Record per-iteration values of loop evaluations.
    pub trace: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            series: ConvergencePolicy::series(),
            loops: ConvergencePolicy::loops(),
            loop_mode: LoopMode::Limit,
            trace: false,
        }
    }
}

impl EvalOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.series.tol = tol;
        self.loops.tol = tol;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.series.threshold = threshold;
        self.loops.threshold = threshold;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.loops.max_steps = n;
        self
    }

    pub fn fixed(mut self, n: usize) -> Self {
        self.loop_mode = LoopMode::Fixed(n);
        self
    }
}

/// Sliding window over the most recent increments of a sequence.
#[derive(Debug, Clone)]
pub(crate) struct Increments {
    window: usize,
    recent: VecDeque<BigRational>,
}

impl Increments {
    pub fn new(window: usize) -> Self {
        Increments {
            window: window.max(2),
            recent: VecDeque::new(),
        }
    }

    pub fn push(&mut self, inc: BigRational) {
        self.recent.push_back(inc);
        if self.recent.len() > self.window {
            self.recent.pop_front();
        }
    }

    pub fn full(&self) -> bool {
        self.recent.len() == self.window
    }

    pub fn last(&self) -> Option<&BigRational> {
        self.recent.back()
    }

    /// Every increment in the window is below `tol` and the geometric tail
    /// estimate `|a_n| r / (1 - r)`, with `r = |a_n| / |a_{n-1}|`, is too.
    pub fn settled(&self, tol: f64) -> bool {
        if !self.full() || self.recent.iter().any(|a| to_f64(&a.abs()) >= tol) {
            return false;
        }
        let n = self.recent.len();
        let last = self.recent[n - 1].abs();
        let prev = self.recent[n - 2].abs();
        if last.is_zero() {
            return true;
        }
        if prev.is_zero() {
            return false;
        }
        let r = to_f64(&(&last / &prev));
        r < 1.0 && to_f64(&last) * r / (1.0 - r) < tol
    }

    /// Every increment in the window is non-zero, of one sign, and at least
    /// as large in magnitude as its predecessor. Returns that sign.
    pub fn growing(&self) -> Option<bool> {
        if !self.full() {
            return None;
        }
        let positive = self.recent[0].is_positive();
        let same_sign = self
            .recent
            .iter()
            .all(|a| !a.is_zero() && a.is_positive() == positive);
        let non_decreasing = self
            .recent
            .iter()
            .zip(self.recent.iter().skip(1))
            .all(|(a, b)| b.abs() >= a.abs());
        (same_sign && non_decreasing).then_some(positive)
    }

    /// Magnitudes strictly decrease over the window.
    pub fn shrinking(&self) -> bool {
        self.full()
            && self
                .recent
                .iter()
                .zip(self.recent.iter().skip(1))
                .all(|(a, b)| b.abs() < a.abs())
    }
}
