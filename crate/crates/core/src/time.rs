use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tick count or the distinguished `INFINITY` (upper bounds only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeValue(u64);

impl TimeValue {
    pub const ZERO: TimeValue = TimeValue(0);
    pub const INFINITY: TimeValue = TimeValue(u64::MAX);
    /// Largest finite value; keeps network arithmetic far away from overflow.
    pub const MAX_FINITE: u64 = 1 << 40;

    pub fn finite(v: u64) -> TimeValue {
        assert!(v <= Self::MAX_FINITE, "time value {v} out of range");
        TimeValue(v)
    }

    pub fn is_infinite(self) -> bool {
        self.0 == u64::MAX
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    /// The finite value, or `None` for `INFINITY`.
    pub fn get(self) -> Option<u64> {
        if self.is_infinite() {
            None
        } else {
            Some(self.0)
        }
    }

    /// Finite value; panics on `INFINITY`.
    pub fn ticks(self) -> u64 {
        self.get().expect("INFINITY has no tick count")
    }

    pub fn saturating_add(self, other: TimeValue) -> TimeValue {
        if self.is_infinite() || other.is_infinite() {
            TimeValue::INFINITY
        } else {
            TimeValue::finite((self.0 + other.0).min(Self::MAX_FINITE))
        }
    }

    /// Signed network weight; `None` for `INFINITY`.
    pub(crate) fn as_weight(self) -> Option<i64> {
        self.get().map(|v| v as i64)
    }
}

impl From<u64> for TimeValue {
    fn from(v: u64) -> Self {
        TimeValue::finite(v)
    }
}

impl fmt::Display for TimeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.get() {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("+INF"),
        }
    }
}

impl Serialize for TimeValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.get() {
            Some(v) => s.serialize_u64(v),
            None => s.serialize_str("+INF"),
        }
    }
}

impl<'de> Deserialize<'de> for TimeValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = TimeValue;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative integer or \"+INF\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<TimeValue, E> {
                if v > TimeValue::MAX_FINITE {
                    return Err(E::custom(format!("time value {v} out of range")));
                }
                Ok(TimeValue(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<TimeValue, E> {
                if v < 0 {
                    return Err(E::custom("negative time value"));
                }
                self.visit_u64(v as u64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<TimeValue, E> {
                match v {
                    "+INF" | "INF" => Ok(TimeValue::INFINITY),
                    _ => Err(E::custom(format!("bad time value {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundError {
    #[error("lower bound must be finite")]
    InfiniteLower,
    #[error("empty interval [{0}, {1}]")]
    Empty(TimeValue, TimeValue),
}

/// Closed interval `[lb, ub]` with finite `lb`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Bound {
    pub lb: TimeValue,
    pub ub: TimeValue,
}

impl Bound {
    pub fn new(lb: TimeValue, ub: TimeValue) -> Result<Bound, BoundError> {
        if lb.is_infinite() {
            return Err(BoundError::InfiniteLower);
        }
        if lb > ub {
            return Err(BoundError::Empty(lb, ub));
        }
        Ok(Bound { lb, ub })
    }

    /// `[lb, ub]` from plain ticks; panics if empty.
    pub fn closed(lb: u64, ub: u64) -> Bound {
        Bound::new(lb.into(), ub.into()).expect("empty bound")
    }

    /// `[lb, +INF]`.
    pub fn at_least(lb: u64) -> Bound {
        Bound { lb: lb.into(), ub: TimeValue::INFINITY }
    }

    pub fn point(t: u64) -> Bound {
        Bound::closed(t, t)
    }

    pub fn unbounded() -> Bound {
        Bound::at_least(0)
    }

    pub fn contains(&self, t: u64) -> bool {
        self.lb.ticks() <= t && self.ub.get().is_none_or(|u| t <= u)
    }

    /// `lb ≤ v ≤ ub` for a signed difference.
    pub fn contains_signed(&self, v: i64) -> bool {
        v >= self.lb.ticks() as i64 && self.ub.get().is_none_or(|u| v <= u as i64)
    }

    pub fn is_singleton(&self) -> bool {
        self.lb == self.ub
    }

    pub fn intersect(&self, other: &Bound) -> Option<Bound> {
        Bound::new(self.lb.max(other.lb), self.ub.min(other.ub)).ok()
    }

    pub fn is_subset_of(&self, other: &Bound) -> bool {
        self.lb >= other.lb && self.ub <= other.ub
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lb: TimeValue,
            ub: TimeValue,
        }
        let raw = Raw::deserialize(d)?;
        Bound::new(raw.lb, raw.ub).map_err(de::Error::custom)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lb, self.ub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_is_greatest() {
        assert!(TimeValue::INFINITY > TimeValue::finite(TimeValue::MAX_FINITE));
        assert!(TimeValue::finite(3) < TimeValue::finite(4));
    }

    #[test]
    fn infinite_lower_bound_rejected() {
        assert_eq!(
            Bound::new(TimeValue::INFINITY, TimeValue::INFINITY),
            Err(BoundError::InfiniteLower)
        );
        assert!(Bound::new(5.into(), 3.into()).is_err());
    }

    #[test]
    fn saturating_add_keeps_infinity() {
        let inf = TimeValue::INFINITY;
        assert_eq!(inf.saturating_add(3.into()), inf);
        assert_eq!(TimeValue::finite(2).saturating_add(3.into()), TimeValue::finite(5));
    }

    #[test]
    fn json_round_trip() {
        let b = Bound::at_least(4);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"lb":4,"ub":"+INF"}"#);
        assert_eq!(serde_json::from_str::<Bound>(&s).unwrap(), b);
        assert!(serde_json::from_str::<Bound>(r#"{"lb":5,"ub":2}"#).is_err());
    }

    #[test]
    fn intersection() {
        let a = Bound::closed(10, 20);
        assert_eq!(a.intersect(&Bound::closed(15, 30)), Some(Bound::closed(15, 20)));
        assert_eq!(a.intersect(&Bound::closed(21, 30)), None);
    }
}
