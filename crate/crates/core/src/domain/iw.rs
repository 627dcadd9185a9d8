//! Integrability-witnessing pairs evaluated at a single state.
//!
//! A pair `(f, g)` carries a value `f` together with a witness `g >= |f|`.
//! Pairs with witness `inf` are all identified; the canonical representative
//! has first component zero.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::policy::{ConvergencePolicy, Increments};
use super::value::{rat_from_f64, rational_str, to_f64, ExtNonNeg};
use crate::error::{EvalError, EvalResult};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IwValue {
    #[serde(with = "rational_str")]
    first: BigRational,
    witness: ExtNonNeg,
}

impl IwValue {
    /// Builds a pair, checking `|first| <= witness`. The result is not
    /// canonicalised, so `(4, inf)` and `(7, inf)` stay distinct raw pairs.
    pub fn new(first: BigRational, witness: ExtNonNeg) -> EvalResult<Self> {
        if let ExtNonNeg::Finite(w) = &witness {
            if first.abs() > *w {
                return Err(EvalError::WitnessViolation {
                    state: "-".into(),
                    first: first.to_string(),
                    witness: w.to_string(),
                });
            }
        }
        Ok(IwValue { first, witness })
    }

    /// Canonical pair; panics if the witness does not bound the first component.
    pub fn of(first: BigRational, witness: ExtNonNeg) -> Self {
        Self::new(first, witness)
            .expect("witness bounds first component")
            .canonical()
    }

    pub fn zero() -> Self {
        IwValue {
            first: BigRational::zero(),
            witness: ExtNonNeg::zero(),
        }
    }

    /// The class of non-integrable values, `(0, inf)`.
    pub fn diverged() -> Self {
        IwValue {
            first: BigRational::zero(),
            witness: ExtNonNeg::Inf,
        }
    }

    pub fn first(&self) -> &BigRational {
        &self.first
    }

    pub fn witness(&self) -> &ExtNonNeg {
        &self.witness
    }

    pub fn is_integrable(&self) -> bool {
        !self.witness.is_inf()
    }

    pub fn canonical(&self) -> Self {
        if self.witness.is_inf() {
            Self::diverged()
        } else {
            self.clone()
        }
    }

    pub fn is_canonical(&self) -> bool {
        !self.witness.is_inf() || self.first.is_zero()
    }

    pub fn add(&self, other: &IwValue) -> IwValue {
        IwValue {
            first: &self.first + &other.first,
            witness: self.witness.add(&other.witness),
        }
        .canonical()
    }

    /// `c * (f, g) = (c f, |c| g)`. Scaling an infinite witness by zero is
    /// rejected.
    pub fn scale(&self, c: &BigRational) -> EvalResult<IwValue> {
        let witness = self
            .witness
            .scale(&c.abs())
            .ok_or_else(|| EvalError::ZeroTimesInf(format!("{c} * {self}")))?;
        Ok(IwValue {
            first: &self.first * c,
            witness,
        }
        .canonical())
    }

    /// Pointwise product with an expectation value `h(σ)`; identical to
    /// [`IwValue::scale`] at a single state.
    pub fn mul(&self, h: &BigRational) -> EvalResult<IwValue> {
        self.scale(h)
    }

    /// The quasi-order: `self ⊑ other` iff `other` has an infinite witness or
    /// both components are below.
    pub fn leq(&self, other: &IwValue) -> bool {
        other.witness.is_inf() || (self.first <= other.first && self.witness <= other.witness)
    }

    /// Same class: both witnesses infinite, or equal components.
    pub fn equiv(&self, other: &IwValue) -> bool {
        (self.witness.is_inf() && other.witness.is_inf()) || self == other
    }

    /// Least upper bound of a finite family: the largest witness, and the
    /// largest first component unless that witness is infinite.
    pub fn sup<'a>(values: impl IntoIterator<Item = &'a IwValue>) -> EvalResult<IwValue> {
        let mut it = values.into_iter();
        let first = it.next().ok_or(EvalError::EmptySup)?;
        let (mut f, mut g) = (first.first.clone(), first.witness.clone());
        for v in it {
            if v.first > f {
                f = v.first.clone();
            }
            if v.witness > g {
                g = v.witness.clone();
            }
        }
        Ok(IwValue {
            first: f,
            witness: g,
        }
        .canonical())
    }
}

impl fmt::Display for IwValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.witness)
    }
}

impl std::ops::Add for IwValue {
    type Output = IwValue;

    fn add(self, rhs: IwValue) -> IwValue {
        IwValue::add(&self, &rhs)
    }
}

/// Outcome of [`limit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOutcome {
    pub value: IwValue,
    /// The witnesses did not settle; the value is `(0, inf)` by heuristic.
    pub divergent: bool,
    /// The first components were extrapolated rather than read off.
    pub accelerated: bool,
}

/// Limit of a sequence of pairs from a finite prefix.
///
/// Witnesses must settle under `policy`, otherwise the result is `(0, inf)`
/// flagged divergent. First components either settle directly, or, when
/// their increments shrink steadily, are extrapolated with Wynn's epsilon
/// algorithm; anything else is reported as undetected.
pub fn limit(seq: &[IwValue], policy: &ConvergencePolicy) -> EvalResult<LimitOutcome> {
    let diverged = LimitOutcome {
        value: IwValue::diverged(),
        divergent: true,
        accelerated: false,
    };
    let Some(last) = seq.last() else {
        return Err(EvalError::LimitUndetected("empty sequence".into()));
    };
    let mut witness_incs = Increments::new(policy.window);
    let mut first_incs = Increments::new(policy.window);
    for pair in seq.windows(2) {
        match (&pair[0].witness, &pair[1].witness) {
            (ExtNonNeg::Finite(a), ExtNonNeg::Finite(b)) => witness_incs.push(b - a),
            _ => return Ok(diverged),
        }
        first_incs.push(&pair[1].first - &pair[0].first);
    }
    if last.witness.is_inf() || last.witness.to_f64() > policy.threshold {
        return Ok(diverged);
    }
    if !witness_incs.settled(policy.tol) {
        return Ok(diverged);
    }
    if first_incs.settled(policy.tol) {
        return Ok(LimitOutcome {
            value: last.canonical(),
            divergent: false,
            accelerated: false,
        });
    }
    if first_incs.shrinking() {
        let xs: Vec<f64> = seq.iter().map(|v| to_f64(&v.first)).collect();
        if let Some(est) = wynn_epsilon(&xs, policy.tol) {
            let first = rat_from_f64(est);
            let witness = last.witness.clone();
            if let Ok(value) = IwValue::new(first, witness) {
                return Ok(LimitOutcome {
                    value,
                    divergent: false,
                    accelerated: true,
                });
            }
        }
    }
    Err(EvalError::LimitUndetected(
        "first components do not settle while witnesses do".into(),
    ))
}

/// Highest even column of the epsilon table whose last two entries agree
/// within `tol`.
fn wynn_epsilon(s: &[f64], tol: f64) -> Option<f64> {
    let tail = &s[s.len().saturating_sub(40)..];
    let mut prev = vec![0.0; tail.len() + 1];
    let mut cur = tail.to_vec();
    let mut best = None;
    let mut col = 0usize;
    while cur.len() > 1 {
        if col.is_multiple_of(2) {
            let n = cur.len();
            if (cur[n - 1] - cur[n - 2]).abs() < tol && cur[n - 1].is_finite() {
                best = Some(cur[n - 1]);
            }
        }
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d == 0.0 || !d.is_finite() {
                return best;
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        prev = cur;
        cur = next;
        col += 1;
    }
    best
}
