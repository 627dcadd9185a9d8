use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Result of evaluating an expression: a rational or `+inf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Finite(BigRational),
    Inf,
}

/// An element of `[0, inf]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtNonNeg {
    Finite(BigRational),
    Inf,
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational value of an `f64` (tolerances are given as floats).
pub fn rat_from_f64(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite tolerance")
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(if r.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

impl Value {
    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            Value::Finite(r) => Some(r),
            Value::Inf => None,
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Value::Inf)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Finite(r) => to_f64(r),
            Value::Inf => f64::INFINITY,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(r) => write!(f, "{r}"),
            Value::Inf => f.write_str("inf"),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Finite(a), Value::Finite(b)) => a.cmp(b),
            (Value::Finite(_), Value::Inf) => Ordering::Less,
            (Value::Inf, Value::Finite(_)) => Ordering::Greater,
            (Value::Inf, Value::Inf) => Ordering::Equal,
        }
    }
}

impl ExtNonNeg {
    pub fn zero() -> Self {
        ExtNonNeg::Finite(BigRational::zero())
    }

    /// `None` if `r` is negative.
    pub fn from_rational(r: BigRational) -> Option<Self> {
        (!r.is_negative()).then_some(ExtNonNeg::Finite(r))
    }

    pub fn from_value(v: Value) -> Option<Self> {
        match v {
            Value::Finite(r) => Self::from_rational(r),
            Value::Inf => Some(ExtNonNeg::Inf),
        }
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            ExtNonNeg::Finite(r) => Some(r),
            ExtNonNeg::Inf => None,
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtNonNeg::Inf)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtNonNeg::Finite(r) if r.is_zero())
    }

    pub fn add(&self, other: &ExtNonNeg) -> ExtNonNeg {
        match (self, other) {
            (ExtNonNeg::Finite(a), ExtNonNeg::Finite(b)) => ExtNonNeg::Finite(a + b),
            _ => ExtNonNeg::Inf,
        }
    }

    /// `p * self` for `p >= 0`; `None` for `0 * inf`.
    pub fn scale(&self, p: &BigRational) -> Option<ExtNonNeg> {
        debug_assert!(!p.is_negative());
        match self {
            ExtNonNeg::Finite(a) => Some(ExtNonNeg::Finite(a * p)),
            ExtNonNeg::Inf if p.is_zero() => None,
            ExtNonNeg::Inf => Some(ExtNonNeg::Inf),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtNonNeg::Finite(r) => to_f64(r),
            ExtNonNeg::Inf => f64::INFINITY,
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            ExtNonNeg::Finite(r) => Value::Finite(r.clone()),
            ExtNonNeg::Inf => Value::Inf,
        }
    }
}

impl From<BigRational> for ExtNonNeg {
    /// Panics on negative input; use [`ExtNonNeg::from_rational`] otherwise.
    fn from(r: BigRational) -> Self {
        ExtNonNeg::from_rational(r).expect("non-negative rational")
    }
}

impl PartialOrd for ExtNonNeg {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtNonNeg {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_value().cmp(&other.to_value())
    }
}

impl fmt::Display for ExtNonNeg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNonNeg::Finite(r) => write!(f, "{r}"),
            ExtNonNeg::Inf => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtNonNeg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "inf" {
            return Ok(ExtNonNeg::Inf);
        }
        let r: BigRational = s.parse().map_err(|_| format!("`{s}` is not a rational"))?;
        ExtNonNeg::from_rational(r).ok_or_else(|| format!("`{s}` is negative"))
    }
}

impl Serialize for ExtNonNeg {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtNonNeg {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing a rational as its exact `p/q` string.
pub mod rational_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(de)?;
        s.trim().parse().map_err(serde::de::Error::custom)
    }
}
