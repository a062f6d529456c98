//! Tick-driven plan execution over an execution dependency graph, with a scripted
//! environment and failure-triggered replanning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Controllability, Fact, GroundDomain, GroundError, ObservationTimeline, ObservedToken, PlanningProblem, Term,
    ValuePattern, VarKind, Window,
};
use crate::plan::{Plan, PlanError, PlanNetwork, Schedule, ScheduledTimeline, ScheduledToken, TokenRef};
use crate::relation::{Primitive, PrimitiveKind, RelationKind};
use crate::solver::{Outcome, SolveError, Solver, SolverConfig};
use crate::stn::{NetworkError, PointId};
use crate::time::Bound;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("plan is temporally inconsistent")]
    Inconsistent,
    #[error("timeline {0} is not in the domain")]
    UnknownTimeline(String),
    #[error("value {1} is not a value of {0}")]
    UnknownValue(String, String),
    #[error("executed prefix of {0} does not match the plan")]
    PrefixMismatch(String),
    #[error("execution log: {0}")]
    Log(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Waiting,
    Starting,
    InExecution,
    Executed,
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecStatus::Waiting => "waiting",
            ExecStatus::Starting => "starting",
            ExecStatus::InExecution => "in_execution",
            ExecStatus::Executed => "executed",
        })
    }
}

/// Controllability class of a token, which fixes its state machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    Controllable,
    PartiallyControllable,
    Uncontrollable,
}

impl TokenClass {
    /// Who fires each transition: `(from, to, by)` with `by` "c" or "u".
    pub fn machine(self) -> &'static [(ExecStatus, ExecStatus, &'static str)] {
        use ExecStatus::*;
        match self {
            TokenClass::Controllable => &[(Waiting, InExecution, "c"), (InExecution, Executed, "c")],
            TokenClass::PartiallyControllable => &[(Waiting, InExecution, "c"), (InExecution, Executed, "u")],
            TokenClass::Uncontrollable => {
                &[(Waiting, Starting, "c"), (Starting, InExecution, "u"), (InExecution, Executed, "u")]
            }
        }
    }
}

/// What an edge demands of its target before the source may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Need {
    /// Exactly in execution.
    InExecution,
    /// In execution or executed.
    Started,
    Executed,
}

impl Need {
    fn holds(self, s: ExecStatus) -> bool {
        match self {
            Need::InExecution => s == ExecStatus::InExecution,
            Need::Started => matches!(s, ExecStatus::InExecution | ExecStatus::Executed),
            Need::Executed => s == ExecStatus::Executed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeCondition {
    pub source: TokenRef,
    pub target: TokenRef,
    pub need: Need,
}

/// Execution dependency graph: start and end conditions between tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Edg {
    pub nodes: Vec<TokenRef>,
    pub start_edges: BTreeSet<EdgeCondition>,
    pub end_edges: BTreeSet<EdgeCondition>,
}

/// Conditions one primitive `x → y` imposes; bounds are non-negative, so `x` never follows `y`.
fn primitive_edges(kind: PrimitiveKind, x: &TokenRef, y: &TokenRef, edg: &mut Edg) {
    if x == y {
        return;
    }
    let e = |need| EdgeCondition { source: y.clone(), target: x.clone(), need };
    match kind {
        PrimitiveKind::StartBeforeStart => edg.start_edges.insert(e(Need::Started)),
        PrimitiveKind::EndBeforeStart => edg.start_edges.insert(e(Need::Executed)),
        PrimitiveKind::StartBeforeEnd => edg.end_edges.insert(e(Need::Started)),
        PrimitiveKind::EndBeforeEnd => edg.end_edges.insert(e(Need::Executed)),
    };
}

/// One node per token; chaining links and every pair relation of the plan become
/// start or end conditions. Point-anchored relations are left to the network.
pub fn build_edg(plan: &Plan) -> Result<Edg, ExecError> {
    let mut edg = Edg::default();
    for tl in &plan.timelines {
        for i in 0..tl.tokens.len() {
            let r = TokenRef::new(&tl.variable, i + 1);
            if i > 0 {
                let prev = TokenRef::new(&tl.variable, i);
                edg.start_edges.insert(EdgeCondition { source: r.clone(), target: prev, need: Need::Executed });
            }
            edg.nodes.push(r);
        }
    }
    for rel in &plan.relations {
        plan.locate(&rel.left)?;
        let Some(right) = &rel.right else { continue };
        plan.locate(right)?;
        let r = rel.relation();
        let expansion = r.expand().map_err(|e| PlanError::BadRelation(rel.left.clone(), e.to_string()))?;
        for p in expansion {
            if let Primitive::Pair { kind, swapped, .. } = p {
                let (x, y) = if swapped { (right, &rel.left) } else { (&rel.left, right) };
                primitive_edges(kind, x, y, &mut edg);
            }
        }
        // The inner interval may only start and end while the outer one runs.
        let inner_outer = match r.kind {
            RelationKind::During => Some((&rel.left, right)),
            RelationKind::Contains => Some((right, &rel.left)),
            _ => None,
        };
        if let Some((inner, outer)) = inner_outer.filter(|(a, b)| a != b) {
            let e = EdgeCondition { source: inner.clone(), target: outer.clone(), need: Need::InExecution };
            edg.start_edges.insert(e.clone());
            edg.end_edges.insert(e);
        }
    }
    Ok(edg)
}

/// Picks the `ordinal`-th token (1-based) with a given value on a timeline.
/// `value` matches a full label (`At(home)`) or just its name (`At`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    pub timeline: String,
    pub value: String,
    #[serde(default = "first")]
    pub ordinal: usize,
}

fn first() -> usize {
    1
}

fn label_name(label: &str) -> &str {
    label.split('(').next().unwrap_or(label)
}

impl Selector {
    fn matches_value(&self, label: &str) -> bool {
        self.value == label || self.value == label_name(label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationOverride {
    #[serde(flatten)]
    pub token: Selector,
    pub ticks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartOverride {
    #[serde(flatten)]
    pub token: Selector,
    pub tick: u64,
}

/// Behaviour of the simulated environment. Uncontrollable tokens without an entry
/// take their minimum duration; observed tokens without one start at the lower
/// bound of their start window.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub durations: Vec<DurationOverride>,
    #[serde(default)]
    pub starts: Vec<StartOverride>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Draws every planned uncontrollable duration uniformly within its declared bounds.
    pub fn sample(plan: &Plan, gd: &GroundDomain, seed: u64) -> Result<Scenario, ExecError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Scenario::default();
        for tl in &plan.timelines {
            let var = gd.var_id(&tl.variable).ok_or_else(|| ExecError::UnknownTimeline(tl.variable.clone()))?;
            if gd.var(var).kind == VarKind::External {
                continue;
            }
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            for t in &tl.tokens {
                let n = seen.entry(&t.value).or_default();
                *n += 1;
                if t.controllability != Controllability::Uncontrollable || t.executed {
                    continue;
                }
                let val = gd.val_id(var, &t.value).ok_or_else(|| ExecError::UnknownValue(tl.variable.clone(), t.value.clone()))?;
                let d = gd.value(var, val).duration;
                let ticks = rng.gen_range(d.lb.ticks()..=d.ub.ticks());
                let token = Selector { timeline: tl.variable.clone(), value: t.value.clone(), ordinal: *n };
                out.durations.push(DurationOverride { token, ticks });
            }
        }
        Ok(out)
    }

    fn lookup<'a, T>(items: &'a [T], sel: impl Fn(&T) -> &Selector, timeline: &str, label: &str, nth: usize) -> Option<&'a T> {
        items.iter().find(|x| {
            let s = sel(x);
            s.timeline == timeline && s.matches_value(label) && s.ordinal == nth
        })
    }
}

/// `nth` such that the token at `idx` is the `nth` token on its timeline matching `label` by full label.
fn occurrence(labels: &[String], idx: usize, by_name: bool) -> usize {
    let key = |l: &str| if by_name { label_name(l).to_string() } else { l.to_string() };
    let k = key(&labels[idx]);
    labels[..=idx].iter().filter(|l| key(l) == k).count()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecConfig {
    /// Wall-clock length of a tick; `None` runs the logical clock as fast as possible.
    pub tick: Option<Duration>,
}

impl ExecConfig {
    pub fn wall_clock(ms: u64) -> ExecConfig {
        ExecConfig { tick: Some(Duration::from_millis(ms)) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTrace {
    pub value: String,
    pub class: TokenClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatched: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
    pub status: ExecStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineTrace {
    pub variable: String,
    pub external: bool,
    pub tokens: Vec<TokenTrace>,
}

/// One status change; the execution log is one of these per line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecEvent {
    pub tick: u64,
    pub token: TokenRef,
    pub value: String,
    pub from: ExecStatus,
    pub to: ExecStatus,
    pub by: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The environment did not end the token by its latest end.
    Overrun,
    /// An observed time falls outside the propagated window.
    OutOfWindow,
    /// A controllable time point could not be dispatched by its latest time.
    Missed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tick: u64,
    pub token: TokenRef,
    pub value: String,
    pub kind: ViolationKind,
    pub window: Bound,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Overrun => "not ended by",
            ViolationKind::OutOfWindow => "observed outside",
            ViolationKind::Missed => "not dispatched within",
        };
        write!(f, "tick {}: {} {} {what} {}", self.tick, self.token, self.value, self.window)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub start_tick: u64,
    pub timelines: Vec<TimelineTrace>,
    pub events: Vec<ExecEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Violation>,
    /// Last tick processed: completion, or the stable state reached after a failure.
    pub last_tick: u64,
}

impl ExecutionTrace {
    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.timelines.iter().all(|t| t.tokens.iter().all(|k| k.status == ExecStatus::Executed))
    }

    /// Executed tokens as scheduled timelines; in-flight and waiting tokens are omitted.
    pub fn schedule(&self) -> Schedule {
        Schedule {
            timelines: self
                .timelines
                .iter()
                .map(|tl| ScheduledTimeline {
                    variable: tl.variable.clone(),
                    tokens: tl
                        .tokens
                        .iter()
                        .filter_map(|k| k.end.map(|end| ScheduledToken { value: k.value.clone(), end }))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn write_log(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut *out, e)?;
            out.write_all(b"\n")?;
        }
        if let Some(v) = &self.failure {
            serde_json::to_writer(&mut *out, &serde_json::json!({ "tick": v.tick, "failure": v }))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Execution {
    Completed(ExecutionTrace),
    /// The trace holds the violation and everything executed up to the stable state.
    Failed(ExecutionTrace),
}

impl Execution {
    pub fn trace(&self) -> &ExecutionTrace {
        match self {
            Execution::Completed(t) | Execution::Failed(t) => t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Firer {
    Executor,
    /// End of a planned uncontrollable token.
    Contingent,
    /// Boundary between observed tokens.
    Observed,
}

/// Tick-stamped feedback, drained once per synchronization in stamp then insertion order.
#[derive(Default)]
struct Feedback {
    queue: BTreeMap<(u64, u64), (usize, usize)>,
    seq: u64,
}

impl Feedback {
    fn push(&mut self, stamp: u64, point: (usize, usize)) {
        self.queue.insert((stamp, self.seq), point);
        self.seq += 1;
    }

    fn drain_until(&mut self, tick: u64) -> Vec<(u64, (usize, usize))> {
        let later = self.queue.split_off(&(tick + 1, 0));
        let due = std::mem::replace(&mut self.queue, later);
        due.into_iter().map(|((s, _), p)| (s, p)).collect()
    }
}

/// Simulated world: knows actual durations and observed boundaries.
struct Environment {
    scenario: Scenario,
    labels: Vec<Vec<String>>,
    feedback: Feedback,
}

impl Environment {
    fn duration(&self, ti: usize, timeline: &str, i: usize, declared_min: u64) -> u64 {
        let labels = &self.labels[ti];
        let full = occurrence(labels, i, false);
        let named = occurrence(labels, i, true);
        self.scenario
            .durations
            .iter()
            .find(|d| {
                let s = &d.token;
                s.timeline == timeline
                    && ((s.value == labels[i] && s.ordinal == full)
                        || (s.value == label_name(&labels[i]) && s.ordinal == named))
            })
            .map(|d| d.ticks)
            .unwrap_or(declared_min)
    }

    fn start(&self, ti: usize, timeline: &str, i: usize) -> Option<u64> {
        let labels = &self.labels[ti];
        let hit = Scenario::lookup(&self.scenario.starts, |s| &s.token, timeline, &labels[i], occurrence(labels, i, false))
            .or_else(|| {
                let named = occurrence(labels, i, true);
                self.scenario.starts.iter().find(|s| {
                    s.token.timeline == timeline && s.token.value == label_name(&labels[i]) && s.token.ordinal == named
                })
            });
        hit.map(|s| s.tick)
    }
}

struct Executor<'a> {
    plan: &'a Plan,
    edg: Edg,
    pn: PlanNetwork,
    firer: Vec<Vec<Firer>>,
    fired: Vec<Vec<Option<u64>>>,
    trace: ExecutionTrace,
    env: Environment,
    dmin: Vec<Vec<u64>>,
    horizon: u64,
}

impl<'a> Executor<'a> {
    fn new(plan: &'a Plan, gd: &GroundDomain, scenario: &Scenario) -> Result<Executor<'a>, ExecError> {
        let edg = build_edg(plan)?;
        let mut pn = plan.network()?;
        if !pn.net.propagate() {
            return Err(ExecError::Inconsistent);
        }
        let mut firer = Vec::new();
        let mut dmin = Vec::new();
        let mut timelines = Vec::new();
        for tl in &plan.timelines {
            let var = gd.var_id(&tl.variable).ok_or_else(|| ExecError::UnknownTimeline(tl.variable.clone()))?;
            let external = gd.var(var).kind == VarKind::External;
            let mut row = Vec::new();
            let mut mins = Vec::new();
            let mut toks = Vec::new();
            for t in &tl.tokens {
                let val = gd
                    .val_id(var, &t.value)
                    .ok_or_else(|| ExecError::UnknownValue(tl.variable.clone(), t.value.clone()))?;
                mins.push(gd.value(var, val).duration.lb.ticks());
                let (f, class) = match (external, t.controllability) {
                    (true, _) => (Firer::Observed, TokenClass::Uncontrollable),
                    (false, Controllability::Uncontrollable) => (Firer::Contingent, TokenClass::PartiallyControllable),
                    (false, Controllability::Controllable) => (Firer::Executor, TokenClass::Controllable),
                };
                row.push(f);
                toks.push(TokenTrace {
                    value: t.value.clone(),
                    class,
                    dispatched: None,
                    start: None,
                    end: None,
                    status: ExecStatus::Waiting,
                });
            }
            firer.push(row);
            dmin.push(mins);
            timelines.push(TimelineTrace { variable: tl.variable.clone(), external, tokens: toks });
        }
        let labels = plan.timelines.iter().map(|t| t.tokens.iter().map(|k| k.value.clone()).collect()).collect();
        let fired = plan.timelines.iter().map(|t| vec![None; t.tokens.len()]).collect();
        Ok(Executor {
            plan,
            edg,
            pn,
            firer,
            fired,
            trace: ExecutionTrace { start_tick: 0, timelines, events: vec![], failure: None, last_tick: 0 },
            env: Environment { scenario: scenario.clone(), labels, feedback: Feedback::default() },
            dmin,
            horizon: plan.horizon.get().unwrap_or(u64::MAX - 1),
        })
    }

    fn tref(&self, ti: usize, i: usize) -> TokenRef {
        TokenRef::new(&self.plan.timelines[ti].variable, i + 1)
    }

    fn status(&self, r: &TokenRef) -> ExecStatus {
        let (ti, i) = self.plan.locate(r).expect("edges reference plan tokens");
        self.trace.timelines[ti].tokens[i].status
    }

    fn set(&mut self, tick: u64, ti: usize, i: usize, to: ExecStatus, by: &str) {
        let token = self.tref(ti, i);
        let k = &mut self.trace.timelines[ti].tokens[i];
        let from = k.status;
        k.status = to;
        match to {
            ExecStatus::Starting => k.dispatched = Some(tick),
            ExecStatus::InExecution => {
                k.start = Some(tick);
                k.dispatched.get_or_insert(tick);
            }
            ExecStatus::Executed => k.end = Some(tick),
            ExecStatus::Waiting => {}
        }
        let value = k.value.clone();
        self.trace.events.push(ExecEvent { tick, token, value, from, to, by: by.into() });
    }

    fn bounds(&self, ti: usize, k: usize) -> Bound {
        self.pn.net.bounds(self.pn.ends[ti][k]).expect("network is propagated")
    }

    fn post(&mut self, p: PointId, b: Bound) {
        self.pn.net.add_requirement(crate::stn::ORIGIN, p, b).expect("plan point");
        let ok = self.pn.net.propagate();
        debug_assert!(ok, "posting inside propagated bounds keeps the network consistent");
    }

    fn conditions(&self, edges: &BTreeSet<EdgeCondition>, r: &TokenRef, assume_executed: Option<&TokenRef>) -> bool {
        edges.iter().filter(|e| &e.source == r).all(|e| {
            let s = if Some(&e.target) == assume_executed { ExecStatus::Executed } else { self.status(&e.target) };
            e.need.holds(s)
        })
    }

    /// Token `i` of timeline `ti` begins at `tick`: uncontrollable ends get scheduled.
    fn begin(&mut self, tick: u64, ti: usize, i: usize) {
        match self.firer[ti][i] {
            Firer::Observed => {
                if self.trace.timelines[ti].tokens[i].status == ExecStatus::Waiting {
                    self.set(tick, ti, i, ExecStatus::Starting, "c");
                }
                self.set(tick, ti, i, ExecStatus::InExecution, "u");
            }
            Firer::Contingent => {
                self.set(tick, ti, i, ExecStatus::InExecution, "c");
                let name = self.plan.timelines[ti].variable.clone();
                let d = self.env.duration(ti, &name, i, self.dmin[ti][i]);
                self.env.feedback.push(tick + d, (ti, i));
            }
            Firer::Executor => self.set(tick, ti, i, ExecStatus::InExecution, "c"),
        }
        // Observed successors become eligible as soon as this one runs.
        if self.firer[ti][i] == Firer::Observed {
            if let Some(next) = self.plan.timelines[ti].tokens.get(i + 1).map(|_| i + 1) {
                self.set(tick, ti, next, ExecStatus::Starting, "c");
            }
        }
    }

    /// Fires point `k` of timeline `ti`: token `k` ends and token `k + 1` begins.
    fn fire(&mut self, tick: u64, ti: usize, k: usize) {
        let p = self.pn.ends[ti][k];
        self.post(p, Bound::point(tick));
        self.fired[ti][k] = Some(tick);
        let by = if self.firer[ti][k] == Firer::Executor { "c" } else { "u" };
        self.set(tick, ti, k, ExecStatus::Executed, by);
        if k + 1 < self.plan.timelines[ti].tokens.len() {
            self.begin(tick, ti, k + 1);
        }
    }

    fn start_at_origin(&mut self) {
        for ti in 0..self.plan.timelines.len() {
            if !self.plan.timelines[ti].tokens.is_empty() {
                self.begin(0, ti, 0);
            }
        }
    }

    /// Observed boundaries are known up front; queue them all.
    fn schedule_observations(&mut self, from: u64) {
        for ti in 0..self.plan.timelines.len() {
            let n = self.plan.timelines[ti].tokens.len();
            let name = self.plan.timelines[ti].variable.clone();
            for k in 0..n {
                if self.firer[ti][k] != Firer::Observed || self.fired[ti][k].is_some() {
                    continue;
                }
                let declared = if k + 1 < n { self.env.start(ti, &name, k + 1) } else { None };
                let at = declared.unwrap_or(self.plan.timelines[ti].tokens[k].end.lb.ticks()).max(from);
                self.env.feedback.push(at, (ti, k));
            }
        }
    }

    fn all_done(&self) -> bool {
        self.fired.iter().all(|r| r.iter().all(Option::is_some))
    }

    fn violation(&self, tick: u64, ti: usize, k: usize, kind: ViolationKind, window: Bound) -> Violation {
        Violation { tick, token: self.tref(ti, k), value: self.plan.timelines[ti].tokens[k].value.clone(), kind, window }
    }

    /// Environment feedback for this tick, then the "not yet" lower bounds.
    fn synchronize(&mut self, tick: u64) -> Result<(), Violation> {
        for (stamp, (ti, k)) in self.env.feedback.drain_until(tick) {
            if self.fired[ti][k].is_some() {
                continue;
            }
            let w = self.bounds(ti, k);
            if !w.contains(stamp) {
                return Err(self.violation(tick, ti, k, ViolationKind::OutOfWindow, w));
            }
            self.fire(stamp, ti, k);
        }
        for ti in 0..self.fired.len() {
            for k in 0..self.fired[ti].len() {
                if self.fired[ti][k].is_some() || self.firer[ti][k] == Firer::Executor {
                    continue;
                }
                let w = self.bounds(ti, k);
                if w.ub.get().is_some_and(|ub| ub <= tick) {
                    return Err(self.violation(tick, ti, k, ViolationKind::Overrun, w));
                }
                self.post(self.pn.ends[ti][k], Bound::at_least(tick + 1));
            }
        }
        Ok(())
    }

    fn can_fire(&self, tick: u64, ti: usize, k: usize) -> bool {
        if self.fired[ti][k].is_some() || self.firer[ti][k] != Firer::Executor {
            return false;
        }
        let here = self.tref(ti, k);
        if self.status(&here) != ExecStatus::InExecution || !self.bounds(ti, k).contains(tick) {
            return false;
        }
        if !self.conditions(&self.edg.end_edges, &here, None) {
            return false;
        }
        match self.plan.timelines[ti].tokens.get(k + 1) {
            Some(_) => self.conditions(&self.edg.start_edges, &self.tref(ti, k + 1), Some(&here)),
            None => true,
        }
    }

    /// Earliest dispatch: fire every eligible controllable point, to a fixpoint.
    fn dispatch(&mut self, tick: u64) -> Result<(), Violation> {
        loop {
            let mut progress = false;
            for ti in 0..self.fired.len() {
                for k in 0..self.fired[ti].len() {
                    if self.can_fire(tick, ti, k) {
                        self.fire(tick, ti, k);
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
        for ti in 0..self.fired.len() {
            for k in 0..self.fired[ti].len() {
                if self.fired[ti][k].is_some() || self.firer[ti][k] != Firer::Executor {
                    continue;
                }
                let w = self.bounds(ti, k);
                if w.ub.get().is_some_and(|ub| ub <= tick) {
                    return Err(self.violation(tick, ti, k, ViolationKind::Missed, w));
                }
                self.post(self.pn.ends[ti][k], Bound::at_least(tick + 1));
            }
        }
        Ok(())
    }

    /// After a failure, let in-flight uncontrollable tokens finish; they cannot be interrupted.
    fn settle(&mut self, from: u64) -> u64 {
        let mut tick = from;
        let in_flight = |s: &Self| {
            (0..s.fired.len()).any(|ti| {
                (0..s.fired[ti].len()).any(|k| {
                    s.firer[ti][k] == Firer::Contingent && s.trace.timelines[ti].tokens[k].status == ExecStatus::InExecution
                })
            })
        };
        while in_flight(self) && tick < self.horizon.saturating_mul(4).max(from + 1000) {
            tick += 1;
            for (stamp, (ti, k)) in self.env.feedback.drain_until(tick) {
                if self.fired[ti][k].is_some() {
                    continue;
                }
                // Bookkeeping only; the network has already failed.
                self.fired[ti][k] = Some(stamp);
                let by = "u";
                self.set(stamp, ti, k, ExecStatus::Executed, by);
                if k + 1 < self.plan.timelines[ti].tokens.len() {
                    let next = k + 1;
                    match self.firer[ti][next] {
                        Firer::Contingent => {
                            self.set(stamp, ti, next, ExecStatus::InExecution, "c");
                            let name = self.plan.timelines[ti].variable.clone();
                            let d = self.env.duration(ti, &name, next, self.dmin[ti][next]);
                            self.env.feedback.push(stamp + d, (ti, next));
                        }
                        Firer::Observed => {
                            self.set(stamp, ti, next, ExecStatus::InExecution, "u");
                            if next + 1 < self.plan.timelines[ti].tokens.len() {
                                self.set(stamp, ti, next + 1, ExecStatus::Starting, "c");
                            }
                        }
                        Firer::Executor => self.set(stamp, ti, next, ExecStatus::InExecution, "c"),
                    }
                }
            }
        }
        tick
    }

    /// Replays an executed prefix: ends of finished tokens are fixed, the clock resumes at `tick`.
    fn resume(&mut self, prefix: &ExecutionTrace) -> Result<u64, ExecError> {
        let tick = prefix.last_tick;
        for (ti, tl) in self.plan.timelines.iter().enumerate() {
            let Some(old) = prefix.timelines.iter().find(|t| t.variable == tl.variable) else {
                continue;
            };
            let started: Vec<&TokenTrace> = old.tokens.iter().filter(|k| k.start.is_some()).collect();
            if started.len() > tl.tokens.len() {
                return Err(ExecError::PrefixMismatch(tl.variable.clone()));
            }
            for (i, k) in started.iter().enumerate() {
                if tl.tokens[i].value != k.value {
                    return Err(ExecError::PrefixMismatch(tl.variable.clone()));
                }
                let t = &mut self.trace.timelines[ti].tokens[i];
                t.dispatched = k.dispatched;
                t.start = k.start;
                t.status = ExecStatus::InExecution;
                if let Some(end) = k.end {
                    let w = self.bounds(ti, i);
                    if !w.contains(end) {
                        return Err(ExecError::PrefixMismatch(tl.variable.clone()));
                    }
                    self.post(self.pn.ends[ti][i], Bound::point(end));
                    self.fired[ti][i] = Some(end);
                    let t = &mut self.trace.timelines[ti].tokens[i];
                    t.end = Some(end);
                    t.status = ExecStatus::Executed;
                }
            }
            // An observed successor of a running observation is already eligible.
            if let Some(i) = started.len().checked_sub(1) {
                if self.firer[ti][i] == Firer::Observed && started[i].end.is_none() && i + 1 < tl.tokens.len() {
                    self.trace.timelines[ti].tokens[i + 1].status = ExecStatus::Starting;
                }
            }
        }
        self.trace.start_tick = prefix.start_tick;
        self.trace.events = prefix.events.clone();
        Ok(tick)
    }

    fn run(mut self, prefix: Option<&ExecutionTrace>, cfg: &ExecConfig) -> Result<Execution, ExecError> {
        let mut tick = match prefix {
            Some(p) => self.resume(p)?,
            None => {
                self.start_at_origin();
                0
            }
        };
        self.schedule_observations(tick);
        let limit = self.horizon.saturating_add(1);
        loop {
            if let Some(d) = cfg.tick {
                std::thread::sleep(d);
            }
            let step = self.synchronize(tick).and_then(|_| self.dispatch(tick));
            if let Err(v) = step {
                log::info!("execution failure: {v}");
                self.trace.failure = Some(v);
                self.trace.last_tick = self.settle(tick);
                return Ok(Execution::Failed(self.trace));
            }
            if self.all_done() {
                self.trace.last_tick = tick;
                return Ok(Execution::Completed(self.trace));
            }
            if tick >= limit {
                // Unreachable for consistent plans: every end is bounded by the horizon.
                let (ti, k) = (0..self.fired.len())
                    .flat_map(|ti| (0..self.fired[ti].len()).map(move |k| (ti, k)))
                    .find(|&(ti, k)| self.fired[ti][k].is_none())
                    .expect("not all done");
                let w = self.bounds(ti, k);
                self.trace.failure = Some(self.violation(tick, ti, k, ViolationKind::Missed, w));
                self.trace.last_tick = tick;
                return Ok(Execution::Failed(self.trace));
            }
            tick += 1;
        }
    }
}

/// Runs a plan against a simulated environment until completion or the first failure.
pub fn execute(plan: &Plan, gd: &GroundDomain, scenario: &Scenario, cfg: &ExecConfig) -> Result<Execution, ExecError> {
    Executor::new(plan, gd, scenario)?.run(None, cfg)
}

/// Continues execution of `plan` after the executed prefix recorded in `prefix`.
pub fn resume(
    plan: &Plan,
    gd: &GroundDomain,
    scenario: &Scenario,
    prefix: &ExecutionTrace,
    cfg: &ExecConfig,
) -> Result<Execution, ExecError> {
    Executor::new(plan, gd, scenario)?.run(Some(prefix), cfg)
}

/// Parses a ground label such as `TakeSample(location4,1)` back into a literal pattern.
pub fn pattern_of_label(label: &str) -> ValuePattern {
    let Some((name, rest)) = label.split_once('(') else {
        return ValuePattern::plain(label);
    };
    let args = rest
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| a.parse::<i64>().map(Term::Num).unwrap_or_else(|_| Term::Sym(a.to_string())))
        .collect();
    ValuePattern { name: name.to_string(), args }
}

/// Replanning problem from a failed execution: the executed prefix of every planned
/// timeline becomes singleton-window facts, running tokens become facts with a fixed
/// start, observations keep what was seen, and the goal is carried over unchanged
/// (goals already achieved unify with the executed facts).
pub fn build_replanning_problem(problem: &PlanningProblem, trace: &ExecutionTrace) -> Result<PlanningProblem, ExecError> {
    let gd = GroundDomain::new(&problem.domain)?;
    let horizon = problem.horizon.get().unwrap_or(u64::MAX);
    let now = trace.last_tick;
    let mut facts = Vec::new();
    let mut observations = Vec::new();
    for tl in &trace.timelines {
        let var = gd.var_id(&tl.variable).ok_or_else(|| ExecError::UnknownTimeline(tl.variable.clone()))?;
        if tl.external {
            let original = problem.observation(&tl.variable);
            let mut tokens = Vec::new();
            let mut prev_end = Bound::point(0);
            for (i, k) in tl.tokens.iter().enumerate() {
                let declared = original.and_then(|o| o.tokens.get(i));
                let name = declared.map(|d| d.name.clone()).unwrap_or_else(|| format!("o{}_{}", tl.variable, i + 1));
                let value = declared.map(|d| d.value.clone()).unwrap_or_else(|| pattern_of_label(&k.value));
                let end = match k.end {
                    Some(e) => Bound::point(e),
                    None => {
                        let d = declared.map(|d| d.end).unwrap_or(Bound::closed(now, horizon));
                        let lo = d.lb.ticks().max(if k.start.is_some() { now } else { 0 });
                        Bound::new(lo.into(), d.ub).unwrap_or(Bound::point(lo))
                    }
                };
                let duration = match (k.start, k.end) {
                    (Some(s), Some(e)) => Bound::point(e - s),
                    _ => declared.map(|d| d.duration).unwrap_or(Bound::unbounded()),
                };
                tokens.push(ObservedToken { name, value, start: prev_end, end, duration });
                prev_end = end;
            }
            observations.push(ObservationTimeline { component: tl.variable.clone(), tokens });
            continue;
        }
        for (i, k) in tl.tokens.iter().enumerate() {
            let Some(s) = k.start else { break };
            let name = format!("x{}_{}", tl.variable, i + 1);
            let window = match k.end {
                Some(e) => Window { start: Bound::point(s), end: Bound::point(e), duration: Bound::point(e - s) },
                None => {
                    let val = gd.val_id(var, &k.value).ok_or_else(|| ExecError::UnknownValue(tl.variable.clone(), k.value.clone()))?;
                    let d = gd.value(var, val).duration;
                    let lo = now.max(s + d.lb.ticks()).min(horizon);
                    let hi = d.ub.get().map(|u| (s + u).min(horizon)).unwrap_or(horizon).max(lo);
                    Window { start: Bound::point(s), end: Bound::closed(lo, hi), duration: d }
                }
            };
            facts.push(Fact {
                name,
                component: tl.variable.clone(),
                value: pattern_of_label(&k.value),
                window,
                executed: k.end.is_some(),
            });
        }
    }
    Ok(PlanningProblem {
        name: format!("{}_replan_{now}", problem.name),
        domain: problem.domain.clone(),
        horizon: problem.horizon,
        facts,
        goal: problem.goal.clone(),
        observations,
    })
}

#[derive(Clone, Debug, Default)]
pub struct ReplanConfig {
    pub max_replans: usize,
    pub solver: SolverConfig,
    pub exec: ExecConfig,
}

#[derive(Clone, Debug)]
pub enum ReplanOutcome {
    /// `failures` lists every failure that triggered a replan; `plans` the plans executed in order.
    Completed { trace: ExecutionTrace, failures: Vec<Violation>, plans: Vec<Plan>, problems: Vec<PlanningProblem> },
    Aborted { failures: Vec<Violation>, trace: ExecutionTrace, problems: Vec<PlanningProblem> },
}

impl ReplanOutcome {
    pub fn failures(&self) -> &[Violation] {
        match self {
            ReplanOutcome::Completed { failures, .. } | ReplanOutcome::Aborted { failures, .. } => failures,
        }
    }

    pub fn trace(&self) -> &ExecutionTrace {
        match self {
            ReplanOutcome::Completed { trace, .. } | ReplanOutcome::Aborted { trace, .. } => trace,
        }
    }
}

/// Execute; on failure build the replanning problem, solve it and resume, up to
/// `max_replans` times.
pub fn execute_with_replanning(
    problem: &PlanningProblem,
    plan: &Plan,
    scenario: &Scenario,
    cfg: &ReplanConfig,
) -> Result<ReplanOutcome, ExecError> {
    let gd = GroundDomain::new(&problem.domain)?;
    let mut failures = Vec::new();
    let mut problems = Vec::new();
    let mut plans = vec![plan.clone()];
    let mut run = execute(plan, &gd, scenario, &cfg.exec)?;
    loop {
        let trace = match run {
            Execution::Completed(trace) => return Ok(ReplanOutcome::Completed { trace, failures, plans, problems }),
            Execution::Failed(trace) => trace,
        };
        failures.push(trace.failure.clone().expect("failed trace carries its violation"));
        if failures.len() > cfg.max_replans {
            return Ok(ReplanOutcome::Aborted { failures, trace, problems });
        }
        let next = build_replanning_problem(problem, &trace)?;
        problems.push(next.clone());
        let solved = match Solver::new(cfg.solver.clone()).solve(&next)? {
            Outcome::Solved { plan, .. } => plan,
            other => {
                log::info!("replanning failed: {:?}", std::mem::discriminant(&other));
                return Ok(ReplanOutcome::Aborted { failures, trace, problems });
            }
        };
        run = resume(&solved, &gd, scenario, &trace, &cfg.exec)?;
        plans.push(solved);
    }
}

/// One Gantt row per token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GanttRow {
    pub timeline: String,
    pub value: String,
    pub start: String,
    pub end: String,
    pub controllability: Controllability,
    pub status: String,
}

/// Earliest start and end of every plan token.
pub fn plan_gantt(plan: &Plan) -> Result<Vec<GanttRow>, ExecError> {
    let mut pn = plan.network()?;
    if !pn.net.propagate() {
        return Err(ExecError::Inconsistent);
    }
    let mut rows = Vec::new();
    for (ti, tl) in plan.timelines.iter().enumerate() {
        for (i, t) in tl.tokens.iter().enumerate() {
            let (s, e) = pn.points(ti, i);
            rows.push(GanttRow {
                timeline: tl.variable.clone(),
                value: t.value.clone(),
                start: pn.net.bounds(s)?.lb.to_string(),
                end: pn.net.bounds(e)?.lb.to_string(),
                controllability: t.controllability,
                status: if t.executed { "executed" } else { "planned" }.into(),
            });
        }
    }
    Ok(rows)
}

/// Observed times of a trace; blank where a time was never observed.
pub fn trace_gantt(trace: &ExecutionTrace) -> Vec<GanttRow> {
    let show = |t: Option<u64>| t.map(|v| v.to_string()).unwrap_or_default();
    trace
        .timelines
        .iter()
        .flat_map(|tl| {
            tl.tokens.iter().map(move |k| GanttRow {
                timeline: tl.variable.clone(),
                value: k.value.clone(),
                start: show(k.start),
                end: show(k.end),
                controllability: match k.class {
                    TokenClass::Controllable => Controllability::Controllable,
                    _ => Controllability::Uncontrollable,
                },
                status: k.status.to_string(),
            })
        })
        .collect()
}
