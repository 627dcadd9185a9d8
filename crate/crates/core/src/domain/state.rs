use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

/// A program state: a finite map from variable names to integers.
///
/// Ordered so that states hash, compare and print deterministically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(BTreeMap<String, BigInt>);

impl State {
    pub fn new() -> Self {
        State(BTreeMap::new())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, i64)>) -> Self {
        State(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), BigInt::from(v)))
                .collect(),
        )
    }

    pub fn get(&self, var: &str) -> Option<&BigInt> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: &str, value: BigInt) {
        self.0.insert(var.to_string(), value);
    }

    /// A copy with `var` updated.
    pub fn with(&self, var: &str, value: BigInt) -> State {
        let mut s = self.clone();
        s.insert(var, value);
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BigInt)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

/// Parses `x=1,y=-2` (braces and spaces optional).
impl FromStr for State {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches('{').trim_end_matches('}');
        let mut out = State::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected `var=value`, found `{part}`"))?;
            let v: BigInt = v
                .trim()
                .parse()
                .map_err(|_| format!("`{}` is not an integer", v.trim()))?;
            out.insert(k.trim(), v);
        }
        Ok(out)
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut m = ser.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            match v.to_i64() {
                Some(n) => m.serialize_entry(k, &n)?,
                None => m.serialize_entry(k, &v.to_string())?,
            }
        }
        m.end()
    }
}

impl FromIterator<(String, BigInt)> for State {
    fn from_iter<T: IntoIterator<Item = (String, BigInt)>>(iter: T) -> Self {
        State(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let s: State = "y=-2, x=1".parse().unwrap();
        assert_eq!(s.to_string(), "{x=1, y=-2}");
        assert_eq!(s, State::from_pairs([("x", 1), ("y", -2)]));
        assert!("x=1.5".parse::<State>().is_err());
        assert!("".parse::<State>().unwrap().is_empty());
    }
}
