//! State grids written as `x=-3..3,y=0..2` or `x=5`.

use std::str::FromStr;

use num_bigint::BigInt;
use thiserror::Error;

use crate::domain::State;

const MAX_STATES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad state grid `{spec}`: {reason}")]
pub struct GridError {
    pub spec: String,
    pub reason: String,
}

/// A cross product of integer ranges, one per variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGrid {
    pub ranges: Vec<(String, BigInt, BigInt)>,
}

impl StateGrid {
    /// Number of states, saturating.
    pub fn len(&self) -> usize {
        self.ranges.iter().fold(1usize, |acc, (_, lo, hi)| {
            let n: usize = (hi - lo + 1u8).try_into().unwrap_or(usize::MAX);
            acc.saturating_mul(n)
        })
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All states, the first variable varying slowest.
    pub fn states(&self) -> Vec<State> {
        let mut out = vec![State::new()];
        for (var, lo, hi) in &self.ranges {
            let mut next = Vec::with_capacity(out.len());
            for s in &out {
                let mut v = lo.clone();
                while &v <= hi {
                    next.push(s.with(var, v.clone()));
                    v += 1;
                }
            }
            out = next;
        }
        out
    }
}

impl FromStr for StateGrid {
    type Err = GridError;

    fn from_str(spec: &str) -> Result<Self, GridError> {
        let err = |reason: String| GridError {
            spec: spec.to_string(),
            reason,
        };
        let mut ranges: Vec<(String, BigInt, BigInt)> = Vec::new();
        let body = spec.trim().trim_start_matches('{').trim_end_matches('}');
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (var, range) = part
                .split_once('=')
                .ok_or_else(|| err(format!("`{part}` is not `var=lo..hi`")))?;
            let var = var.trim();
            if var.is_empty() || !var.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(err(format!("bad variable name `{var}`")));
            }
            if ranges.iter().any(|(v, _, _)| v == var) {
                return Err(err(format!("`{var}` appears twice")));
            }
            let num = |t: &str| {
                t.trim()
                    .parse::<BigInt>()
                    .map_err(|_| err(format!("`{}` is not an integer", t.trim())))
            };
            let (lo, hi) = match range.split_once("..") {
                Some((a, b)) => (num(a)?, num(b)?),
                None => {
                    let v = num(range)?;
                    (v.clone(), v)
                }
            };
            if lo > hi {
                return Err(err(format!("empty range for `{var}`")));
            }
            ranges.push((var.to_string(), lo, hi));
        }
        let grid = StateGrid { ranges };
        if grid.len() > MAX_STATES {
            return Err(err(format!("more than {MAX_STATES} states")));
        }
        Ok(grid)
    }
}

/// Parses a grid and lists its states.
pub fn parse_grid(spec: &str) -> Result<Vec<State>, GridError> {
    Ok(spec.parse::<StateGrid>()?.states())
}
