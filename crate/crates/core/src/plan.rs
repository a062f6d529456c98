//! Flexible plans (timelines plus committed relations) and scheduled timelines.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Controllability;
use crate::relation::{Interval, Relation, RelationKind};
use crate::stn::{NetworkError, PointId, TemporalNetwork, ORIGIN};
use crate::time::{Bound, TimeValue};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("malformed plan JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown token {0}")]
    UnknownToken(TokenRef),
    #[error("relation on {0} is malformed: {1}")]
    BadRelation(TokenRef, String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("plan is temporally inconsistent")]
    Inconsistent,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A flexible token; its start window is the previous token's end window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub value: String,
    pub end: Bound,
    pub duration: Bound,
    pub controllability: Controllability,
    #[serde(default, skip_serializing_if = "is_false")]
    pub executed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub variable: String,
    pub tokens: Vec<Token>,
}

impl Timeline {
    /// End window of the last token, or `[0, 0]` when empty.
    pub fn horizon(&self) -> Bound {
        self.tokens.last().map(|t| t.end).unwrap_or(Bound::point(0))
    }

    /// Start window of token `i` (0-based).
    pub fn start_window(&self, i: usize) -> Bound {
        if i == 0 {
            Bound::point(0)
        } else {
            self.tokens[i - 1].end
        }
    }
}

/// `timeline[ordinal]`, with 1-based ordinals as in `x^1, x^2, …`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenRef {
    pub timeline: String,
    pub token: usize,
}

impl TokenRef {
    pub fn new(timeline: &str, ordinal: usize) -> TokenRef {
        TokenRef { timeline: timeline.into(), token: ordinal }
    }

    pub fn index(&self) -> usize {
        self.token.saturating_sub(1)
    }
}

impl fmt::Display for TokenRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.timeline, self.token)
    }
}

/// A member of ℛ; `right` is absent for point-anchored kinds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanRelation {
    pub left: TokenRef,
    pub kind: RelationKind,
    pub bounds: Vec<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<TimeValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<TokenRef>,
}

impl PlanRelation {
    pub fn new(left: TokenRef, r: &Relation, right: Option<TokenRef>) -> PlanRelation {
        PlanRelation { left, kind: r.kind, bounds: r.bounds.clone(), anchor: r.anchor, right }
    }

    pub fn relation(&self) -> Relation {
        Relation { kind: self.kind, bounds: self.bounds.clone(), anchor: self.anchor }
    }
}

impl fmt::Display for PlanRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.left, self.relation())?;
        if let Some(r) = &self.right {
            write!(f, " {r}")?;
        }
        Ok(())
    }
}

/// A flexible plan `(FTL, ℛ)`; timelines include the observed external ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub domain: String,
    pub horizon: TimeValue,
    pub timelines: Vec<Timeline>,
    pub relations: Vec<PlanRelation>,
    pub pseudo_controllable: bool,
}

/// A plan's temporal network: one end point per token, starts shared with predecessors.
pub struct PlanNetwork {
    pub net: TemporalNetwork,
    pub ends: Vec<Vec<PointId>>,
}

impl PlanNetwork {
    pub fn start(&self, timeline: usize, i: usize) -> PointId {
        if i == 0 {
            ORIGIN
        } else {
            self.ends[timeline][i - 1]
        }
    }

    pub fn points(&self, timeline: usize, i: usize) -> (PointId, PointId) {
        (self.start(timeline, i), self.ends[timeline][i])
    }
}

impl Plan {
    pub fn timeline(&self, variable: &str) -> Option<&Timeline> {
        self.timelines.iter().find(|t| t.variable == variable)
    }

    fn timeline_index(&self, variable: &str) -> Option<usize> {
        self.timelines.iter().position(|t| t.variable == variable)
    }

    /// Timeline index and 0-based token index of a reference.
    pub fn locate(&self, r: &TokenRef) -> Result<(usize, usize), PlanError> {
        let ti = self.timeline_index(&r.timeline).ok_or_else(|| PlanError::UnknownToken(r.clone()))?;
        if r.token == 0 || r.token > self.timelines[ti].tokens.len() {
            return Err(PlanError::UnknownToken(r.clone()));
        }
        Ok((ti, r.index()))
    }

    pub fn token(&self, r: &TokenRef) -> Option<&Token> {
        self.locate(r).ok().map(|(t, i)| &self.timelines[t].tokens[i])
    }

    pub fn token_count(&self) -> usize {
        self.timelines.iter().map(|t| t.tokens.len()).sum()
    }

    /// Pretty JSON with a trailing newline; `from_json ∘ to_json` is the identity.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Plan, PlanError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Network with every token window, chaining and relation of ℛ posted (not propagated).
    pub fn network(&self) -> Result<PlanNetwork, PlanError> {
        let mut net = TemporalNetwork::new();
        let mut ends = Vec::new();
        for tl in &self.timelines {
            let mut prev = ORIGIN;
            let mut row = Vec::new();
            for t in &tl.tokens {
                let e = net.add_time_point();
                net.add_requirement(ORIGIN, e, t.end)?;
                net.add_requirement(prev, e, t.duration)?;
                row.push(e);
                prev = e;
            }
            ends.push(row);
        }
        let mut pn = PlanNetwork { net, ends };
        for r in &self.relations {
            let (lt, li) = self.locate(&r.left)?;
            let a = pn.points(lt, li);
            let b = match &r.right {
                Some(rr) => {
                    let (rt, ri) = self.locate(rr)?;
                    pn.points(rt, ri)
                }
                None => a,
            };
            let rel = r.relation();
            rel.check().map_err(|e| PlanError::BadRelation(r.left.clone(), e.to_string()))?;
            if rel.kind.is_point() != r.right.is_none() {
                return Err(PlanError::BadRelation(r.left.clone(), "operand does not match relation kind".into()));
            }
            pn.net.post_relation(&rel, a, b)?;
        }
        Ok(pn)
    }

    /// Schedule fixing every end at its earliest bound in the propagated plan network.
    pub fn earliest_schedule(&self) -> Result<Schedule, PlanError> {
        let mut pn = self.network()?;
        if !pn.net.propagate() {
            return Err(PlanError::Inconsistent);
        }
        let mut out = Schedule::default();
        for (ti, tl) in self.timelines.iter().enumerate() {
            let mut tokens = Vec::new();
            for (i, t) in tl.tokens.iter().enumerate() {
                let end = pn.net.bounds(pn.ends[ti][i])?.lb.ticks();
                tokens.push(ScheduledToken { value: t.value.clone(), end });
            }
            out.timelines.push(ScheduledTimeline { variable: tl.variable.clone(), tokens });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledToken {
    pub value: String,
    pub end: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledTimeline {
    pub variable: String,
    pub tokens: Vec<ScheduledToken>,
}

impl ScheduledTimeline {
    pub fn interval(&self, i: usize) -> Interval {
        let start = if i == 0 { 0 } else { self.tokens[i - 1].end };
        Interval::new(start, self.tokens[i].end)
    }
}

/// A set of scheduled timelines (STL).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub timelines: Vec<ScheduledTimeline>,
}

impl Schedule {
    pub fn timeline(&self, variable: &str) -> Option<&ScheduledTimeline> {
        self.timelines.iter().find(|t| t.variable == variable)
    }

    pub fn interval(&self, r: &TokenRef) -> Option<Interval> {
        let tl = self.timeline(&r.timeline)?;
        (r.token >= 1 && r.token <= tl.tokens.len()).then(|| tl.interval(r.index()))
    }

    /// Builds a schedule from `(variable, [(value, end), …])` rows.
    pub fn from_rows(rows: &[(&str, &[(&str, u64)])]) -> Schedule {
        Schedule {
            timelines: rows
                .iter()
                .map(|(v, toks)| ScheduledTimeline {
                    variable: v.to_string(),
                    tokens: toks.iter().map(|(val, end)| ScheduledToken { value: val.to_string(), end: *end }).collect(),
                })
                .collect(),
        }
    }
}
