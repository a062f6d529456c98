use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Bound, TimeValue};

/// The four primitive interval-to-interval relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    StartBeforeStart,
    EndBeforeEnd,
    StartBeforeEnd,
    EndBeforeStart,
}

/// Interval-to-point relations: `l ≤ t − s_A ≤ u` and `l ≤ t − e_A ≤ u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    StartsBefore,
    EndsBefore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    StartBeforeStart,
    EndBeforeEnd,
    StartBeforeEnd,
    EndBeforeStart,
    Meets,
    MetBy,
    Before,
    After,
    Overlaps,
    Equals,
    Contains,
    During,
    Starts,
    Finishes,
    StartsAt,
    EndsAt,
    StartsBefore,
    EndsBefore,
}

impl RelationKind {
    pub const ALL: [RelationKind; 18] = [
        RelationKind::StartBeforeStart,
        RelationKind::EndBeforeEnd,
        RelationKind::StartBeforeEnd,
        RelationKind::EndBeforeStart,
        RelationKind::Meets,
        RelationKind::MetBy,
        RelationKind::Before,
        RelationKind::After,
        RelationKind::Overlaps,
        RelationKind::Equals,
        RelationKind::Contains,
        RelationKind::During,
        RelationKind::Starts,
        RelationKind::Finishes,
        RelationKind::StartsAt,
        RelationKind::EndsAt,
        RelationKind::StartsBefore,
        RelationKind::EndsBefore,
    ];

    /// Number of bounds the kind carries.
    pub fn arity(self) -> usize {
        use RelationKind::*;
        match self {
            Meets | MetBy | Equals | StartsAt | EndsAt => 0,
            Overlaps | Contains | During => 2,
            _ => 1,
        }
    }

    /// Right operand is a time point rather than a token.
    pub fn is_point(self) -> bool {
        use RelationKind::*;
        matches!(self, StartsAt | EndsAt | StartsBefore | EndsBefore)
    }

    pub fn keyword(self) -> &'static str {
        use RelationKind::*;
        match self {
            StartBeforeStart => "START_BEFORE_START",
            EndBeforeEnd => "END_BEFORE_END",
            StartBeforeEnd => "START_BEFORE_END",
            EndBeforeStart => "END_BEFORE_START",
            Meets => "MEETS",
            MetBy => "MET_BY",
            Before => "BEFORE",
            After => "AFTER",
            Overlaps => "OVERLAPS",
            Equals => "EQUALS",
            Contains => "CONTAINS",
            During => "DURING",
            Starts => "STARTS",
            Finishes => "FINISHES",
            StartsAt => "STARTS_AT",
            EndsAt => "ENDS_AT",
            StartsBefore => "STARTS_BEFORE",
            EndsBefore => "ENDS_BEFORE",
        }
    }

    pub fn from_keyword(word: &str) -> Option<RelationKind> {
        let upper = word.to_ascii_uppercase();
        RelationKind::ALL.into_iter().find(|k| k.keyword() == upper)
    }

    fn primitive(self) -> Option<PrimitiveKind> {
        match self {
            RelationKind::StartBeforeStart => Some(PrimitiveKind::StartBeforeStart),
            RelationKind::EndBeforeEnd => Some(PrimitiveKind::EndBeforeEnd),
            RelationKind::StartBeforeEnd => Some(PrimitiveKind::StartBeforeEnd),
            RelationKind::EndBeforeStart => Some(PrimitiveKind::EndBeforeStart),
            _ => None,
        }
    }
}

impl From<PrimitiveKind> for RelationKind {
    fn from(p: PrimitiveKind) -> Self {
        match p {
            PrimitiveKind::StartBeforeStart => RelationKind::StartBeforeStart,
            PrimitiveKind::EndBeforeEnd => RelationKind::EndBeforeEnd,
            PrimitiveKind::StartBeforeEnd => RelationKind::StartBeforeEnd,
            PrimitiveKind::EndBeforeStart => RelationKind::EndBeforeStart,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelationError {
    #[error("{kind:?} takes {expected} bound(s), got {got}")]
    Arity { kind: RelationKind, expected: usize, got: usize },
    #[error("{0:?} needs a finite time anchor")]
    MissingAnchor(RelationKind),
    #[error("{0:?} takes no time anchor")]
    UnexpectedAnchor(RelationKind),
}

/// A quantified temporal relation; point kinds carry a finite anchor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub bounds: Vec<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<TimeValue>,
}

impl Relation {
    pub fn new(
        kind: RelationKind,
        bounds: Vec<Bound>,
        anchor: Option<TimeValue>,
    ) -> Result<Relation, RelationError> {
        let r = Relation { kind, bounds, anchor };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<(), RelationError> {
        let expected = self.kind.arity();
        if self.bounds.len() != expected {
            return Err(RelationError::Arity { kind: self.kind, expected, got: self.bounds.len() });
        }
        match (self.kind.is_point(), self.anchor) {
            (true, Some(t)) if t.is_finite() => Ok(()),
            (true, _) => Err(RelationError::MissingAnchor(self.kind)),
            (false, Some(_)) => Err(RelationError::UnexpectedAnchor(self.kind)),
            (false, None) => Ok(()),
        }
    }

    pub fn primitive(kind: PrimitiveKind, bound: Bound) -> Relation {
        Relation { kind: kind.into(), bounds: vec![bound], anchor: None }
    }

    pub fn meets() -> Relation {
        Relation { kind: RelationKind::Meets, bounds: vec![], anchor: None }
    }

    pub fn before(bound: Bound) -> Relation {
        Relation { kind: RelationKind::Before, bounds: vec![bound], anchor: None }
    }

    pub fn contains(b1: Bound, b2: Bound) -> Relation {
        Relation { kind: RelationKind::Contains, bounds: vec![b1, b2], anchor: None }
    }

    pub fn during(b1: Bound, b2: Bound) -> Relation {
        Relation { kind: RelationKind::During, bounds: vec![b1, b2], anchor: None }
    }

    pub fn equals() -> Relation {
        Relation { kind: RelationKind::Equals, bounds: vec![], anchor: None }
    }

    pub fn point(kind: PointKind, bound: Bound, anchor: u64) -> Relation {
        let kind = match kind {
            PointKind::StartsBefore => RelationKind::StartsBefore,
            PointKind::EndsBefore => RelationKind::EndsBefore,
        };
        Relation { kind, bounds: vec![bound], anchor: Some(anchor.into()) }
    }

    fn b(&self, i: usize) -> Bound {
        self.bounds[i]
    }

    fn anchor_ticks(&self) -> u64 {
        self.anchor.map(|a| a.ticks()).unwrap_or(0)
    }

    /// The primitive expansion; `swapped` primitives relate the right operand to the left one.
    pub fn expand(&self) -> Result<Vec<Primitive>, RelationError> {
        self.check()?;
        use RelationKind::*;
        let zero = Bound::point(0);
        let pair = |kind, bound, swapped| Primitive::Pair { kind, bound, swapped };
        let out = match self.kind {
            StartBeforeStart | EndBeforeEnd | StartBeforeEnd | EndBeforeStart => {
                vec![pair(self.kind.primitive().unwrap(), self.b(0), false)]
            }
            Meets => vec![pair(PrimitiveKind::EndBeforeStart, zero, false)],
            MetBy => vec![pair(PrimitiveKind::EndBeforeStart, zero, true)],
            Before => vec![pair(PrimitiveKind::EndBeforeStart, self.b(0), false)],
            After => vec![pair(PrimitiveKind::EndBeforeStart, self.b(0), true)],
            Overlaps => vec![
                pair(PrimitiveKind::StartBeforeStart, self.b(0), false),
                pair(PrimitiveKind::EndBeforeEnd, self.b(1), false),
                pair(PrimitiveKind::StartBeforeEnd, Bound::unbounded(), true),
            ],
            Equals => vec![
                pair(PrimitiveKind::StartBeforeStart, zero, false),
                pair(PrimitiveKind::EndBeforeEnd, zero, false),
            ],
            Contains => vec![
                pair(PrimitiveKind::StartBeforeStart, self.b(0), false),
                pair(PrimitiveKind::EndBeforeEnd, self.b(1), true),
            ],
            During => vec![
                pair(PrimitiveKind::StartBeforeStart, self.b(0), true),
                pair(PrimitiveKind::EndBeforeEnd, self.b(1), false),
            ],
            Starts => vec![
                pair(PrimitiveKind::StartBeforeStart, zero, false),
                pair(PrimitiveKind::EndBeforeEnd, self.b(0), false),
            ],
            Finishes => vec![
                pair(PrimitiveKind::StartBeforeStart, self.b(0), false),
                pair(PrimitiveKind::EndBeforeEnd, zero, false),
            ],
            StartsAt => vec![Primitive::Point {
                kind: PointKind::StartsBefore,
                bound: zero,
                anchor: self.anchor_ticks(),
            }],
            EndsAt => vec![Primitive::Point {
                kind: PointKind::EndsBefore,
                bound: zero,
                anchor: self.anchor_ticks(),
            }],
            StartsBefore => vec![Primitive::Point {
                kind: PointKind::StartsBefore,
                bound: self.b(0),
                anchor: self.anchor_ticks(),
            }],
            EndsBefore => vec![Primitive::Point {
                kind: PointKind::EndsBefore,
                bound: self.b(0),
                anchor: self.anchor_ticks(),
            }],
        };
        Ok(out)
    }

    /// Truth on scheduled intervals, evaluated directly from the relation's meaning.
    /// `b` is ignored for point kinds.
    pub fn holds(&self, a: Interval, b: Interval) -> bool {
        use RelationKind::*;
        let d = |x: i64, y: i64| y - x;
        let t = self.anchor_ticks() as i64;
        match self.kind {
            StartBeforeStart => self.b(0).contains_signed(d(a.start, b.start)),
            EndBeforeEnd => self.b(0).contains_signed(d(a.end, b.end)),
            StartBeforeEnd => self.b(0).contains_signed(d(a.start, b.end)),
            EndBeforeStart => self.b(0).contains_signed(d(a.end, b.start)),
            Meets => a.end == b.start,
            MetBy => b.end == a.start,
            Before => self.b(0).contains_signed(b.start - a.end),
            After => self.b(0).contains_signed(a.start - b.end),
            Overlaps => {
                self.b(0).contains_signed(b.start - a.start)
                    && self.b(1).contains_signed(b.end - a.end)
                    && b.start <= a.end
            }
            Equals => a.start == b.start && a.end == b.end,
            Contains => {
                self.b(0).contains_signed(b.start - a.start) && self.b(1).contains_signed(a.end - b.end)
            }
            During => {
                self.b(0).contains_signed(a.start - b.start) && self.b(1).contains_signed(b.end - a.end)
            }
            Starts => a.start == b.start && self.b(0).contains_signed(b.end - a.end),
            Finishes => self.b(0).contains_signed(b.start - a.start) && a.end == b.end,
            StartsAt => a.start == t,
            EndsAt => a.end == t,
            StartsBefore => self.b(0).contains_signed(t - a.start),
            EndsBefore => self.b(0).contains_signed(t - a.end),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.keyword().to_ascii_lowercase())?;
        for b in &self.bounds {
            write!(f, "{b}")?;
        }
        if let Some(a) = self.anchor {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// Scheduled interval `[start, end]` in ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub start: i64,
    pub end: i64,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Interval {
        Interval { start: start as i64, end: end as i64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Pair { kind: PrimitiveKind, bound: Bound, swapped: bool },
    Point { kind: PointKind, bound: Bound, anchor: u64 },
}

impl Primitive {
    pub fn holds(&self, a: Interval, b: Interval) -> bool {
        match *self {
            Primitive::Pair { kind, bound, swapped } => {
                let (x, y) = if swapped { (b, a) } else { (a, b) };
                let diff = match kind {
                    PrimitiveKind::StartBeforeStart => y.start - x.start,
                    PrimitiveKind::EndBeforeEnd => y.end - x.end,
                    PrimitiveKind::StartBeforeEnd => y.end - x.start,
                    PrimitiveKind::EndBeforeStart => y.start - x.end,
                };
                bound.contains_signed(diff)
            }
            Primitive::Point { kind, bound, anchor } => {
                let p = match kind {
                    PointKind::StartsBefore => a.start,
                    PointKind::EndsBefore => a.end,
                };
                bound.contains_signed(anchor as i64 - p)
            }
        }
    }
}
