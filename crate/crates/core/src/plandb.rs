//! Mutable plan database: tokens over a temporal network, committed relations,
//! flaw detection and reversible refinements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    goal_to_rule, Controllability, GroundDomain, GroundError, GroundStatement, Operand,
    PlanningProblem, ValId, VarId, VarKind,
};
use crate::plan::{Plan, PlanRelation, Schedule, ScheduledTimeline, ScheduledToken, Timeline, Token, TokenRef};
use crate::relation::Relation;
use crate::stn::{LinkId, NetworkError, PointId, TemporalNetwork, ORIGIN};
use crate::time::{Bound, TimeValue};
use crate::validator::required_uncontrollable_windows;

pub const DEFAULT_MAX_GAP_PATH: usize = 6;

#[derive(Debug, Error)]
pub enum PlanDbError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("facts and observations are temporally inconsistent")]
    Inconsistent,
    #[error("problem has no horizon")]
    NoHorizon,
    #[error("journal is empty")]
    EmptyJournal,
    #[error("refinement does not apply: {0}")]
    NotApplicable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TokId(pub usize);

impl fmt::Display for TokId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Fact,
    Observation,
    Goal,
    Expansion,
    GapFill,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenState {
    /// An open goal, not yet placed on its timeline.
    Pending,
    Active,
    /// Unified with another token.
    Merged(TokId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DbToken {
    pub var: VarId,
    pub val: ValId,
    pub start: PointId,
    pub end: PointId,
    pub controllability: Controllability,
    pub origin: Origin,
    pub state: TokenState,
    pub executed: bool,
    pub rules_applied: bool,
    pub link: Option<LinkId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DbRelation {
    pub left: TokId,
    pub relation: Relation,
    pub right: Option<TokId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlawKind {
    BehaviorViolation,
    UncheckedObservation,
    OpenGoal,
    SchedulingThreat,
    Gap,
}

impl fmt::Display for FlawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlawKind::BehaviorViolation => "behavior_violation",
            FlawKind::UncheckedObservation => "unchecked_observation",
            FlawKind::OpenGoal => "open_goal",
            FlawKind::SchedulingThreat => "scheduling_threat",
            FlawKind::Gap => "gap",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flaw {
    /// Rules of an active token not yet applied; `None` is the goal rule.
    Behavior { token: Option<TokId> },
    Observation { var: VarId },
    Goal { token: TokId },
    Threat { a: TokId, b: TokId },
    /// Missing link between neighbours; `after == None` is the timeline head,
    /// `before == None` the tail, both `None` an empty timeline.
    Gap { var: VarId, after: Option<TokId>, before: Option<TokId> },
}

impl Flaw {
    pub fn kind(&self) -> FlawKind {
        match self {
            Flaw::Behavior { token: Some(_) } => FlawKind::BehaviorViolation,
            Flaw::Behavior { token: None } | Flaw::Goal { .. } => FlawKind::OpenGoal,
            Flaw::Observation { .. } => FlawKind::UncheckedObservation,
            Flaw::Threat { .. } => FlawKind::SchedulingThreat,
            Flaw::Gap { .. } => FlawKind::Gap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Refinement {
    /// Choose one disjunct per triggered rule (`choice[i]` for the i-th rule).
    ApplyRules { token: Option<TokId>, choice: Vec<usize> },
    Expand { token: TokId, choice: Vec<usize> },
    Unify { token: TokId, with: TokId },
    Verify { var: VarId },
    Order { first: TokId, second: TokId },
    /// Insert `path` values between neighbours, chained with `meets`.
    Fill { var: VarId, after: Option<TokId>, before: Option<TokId>, path: Vec<ValId> },
    PinStart { token: TokId },
    PinEnd { token: TokId },
    Seed { var: VarId, val: ValId },
}

impl Refinement {
    pub fn name(&self) -> &'static str {
        match self {
            Refinement::ApplyRules { .. } => "apply_rules",
            Refinement::Expand { .. } => "expand",
            Refinement::Unify { .. } => "unify",
            Refinement::Verify { .. } => "verify",
            Refinement::Order { .. } => "order",
            Refinement::Fill { .. } => "fill",
            Refinement::PinStart { .. } => "pin_start",
            Refinement::PinEnd { .. } => "pin_end",
            Refinement::Seed { .. } => "seed",
        }
    }
}

/// Everything a refinement can change; the journal stores whole snapshots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DbState {
    pub net: TemporalNetwork,
    pub tokens: Vec<DbToken>,
    pub relations: Vec<DbRelation>,
    pub goal_applied: bool,
    pub verified: BTreeSet<VarId>,
}

#[derive(Clone, Debug)]
pub struct PlanDatabase {
    gd: Arc<GroundDomain>,
    horizon: u64,
    goal: Arc<Vec<GroundStatement>>,
    observed: BTreeSet<VarId>,
    /// Observed end and duration windows, reproduced verbatim in plans.
    observed_windows: BTreeMap<TokId, (Bound, Bound)>,
    max_gap_path: usize,
    state: DbState,
    journal: Vec<(Refinement, DbState)>,
}

impl PlanDatabase {
    /// Facts and observations installed, the goal rule applied when it has a single disjunct.
    pub fn init(problem: &PlanningProblem) -> Result<PlanDatabase, PlanDbError> {
        let gd = Arc::new(GroundDomain::new(&problem.domain)?);
        PlanDatabase::with_domain(problem, gd)
    }

    pub fn with_domain(problem: &PlanningProblem, gd: Arc<GroundDomain>) -> Result<PlanDatabase, PlanDbError> {
        let horizon = problem.horizon.get().ok_or(PlanDbError::NoHorizon)?;
        let mut goal = Vec::new();
        if !problem.goal.accomplishments.is_empty() {
            for r in gd.ground_rule(&goal_to_rule(&problem.goal))? {
                goal.extend(r.disjuncts);
            }
        }
        let mut db = PlanDatabase {
            gd,
            horizon,
            goal: Arc::new(goal),
            observed: BTreeSet::new(),
            observed_windows: BTreeMap::new(),
            max_gap_path: DEFAULT_MAX_GAP_PATH,
            state: DbState {
                net: TemporalNetwork::new(),
                tokens: vec![],
                relations: vec![],
                goal_applied: false,
                verified: BTreeSet::new(),
            },
            journal: vec![],
        };
        for f in &problem.facts {
            let (var, val) = db.gd.resolve(&f.component, &f.value)?;
            let t = db.new_token(var, val, Origin::Fact, TokenState::Active, f.executed)?;
            let tok = db.state.tokens[t.0].clone();
            let net = &mut db.state.net;
            net.add_requirement(ORIGIN, tok.start, f.window.start)?;
            net.add_requirement(ORIGIN, tok.end, f.window.end)?;
            net.add_requirement(tok.start, tok.end, f.window.duration)?;
        }
        for o in &problem.observations {
            let var = db.gd.var_id(&o.component).ok_or_else(|| GroundError::UnknownComponent(o.component.clone()))?;
            db.observed.insert(var);
            let mut prev: Option<PointId> = None;
            for ot in &o.tokens {
                let (_, val) = db.gd.resolve(&o.component, &ot.value)?;
                let t = db.new_token(var, val, Origin::Observation, TokenState::Active, true)?;
                db.observed_windows.insert(t, (ot.end, ot.duration));
                let tok = db.state.tokens[t.0].clone();
                let net = &mut db.state.net;
                net.add_requirement(ORIGIN, tok.start, ot.start)?;
                net.add_requirement(ORIGIN, tok.end, ot.end)?;
                net.add_requirement(tok.start, tok.end, ot.duration)?;
                if let Some(p) = prev {
                    net.add_requirement(p, tok.start, Bound::point(0))?;
                }
                prev = Some(tok.end);
            }
        }
        match db.goal.len() {
            0 => db.state.goal_applied = true,
            1 => db.apply_goal_disjunct(0)?,
            _ => {}
        }
        if !db.state.net.propagate() {
            return Err(PlanDbError::Inconsistent);
        }
        Ok(db)
    }

    pub fn set_max_gap_path(&mut self, n: usize) {
        self.max_gap_path = n;
    }

    pub fn domain(&self) -> &GroundDomain {
        &self.gd
    }

    pub fn shared_domain(&self) -> Arc<GroundDomain> {
        self.gd.clone()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn state(&self) -> &DbState {
        &self.state
    }

    pub fn token(&self, t: TokId) -> &DbToken {
        &self.state.tokens[t.0]
    }

    pub fn journal_len(&self) -> usize {
        self.journal.len()
    }

    pub fn network(&self) -> &TemporalNetwork {
        &self.state.net
    }

    pub fn is_consistent(&self) -> bool {
        self.state.net.is_consistent() && !self.state.net.is_stale()
    }

    pub fn token_ids(&self) -> impl Iterator<Item = TokId> + '_ {
        (0..self.state.tokens.len()).map(TokId)
    }

    pub fn pending_goals(&self) -> Vec<TokId> {
        self.token_ids().filter(|&t| self.token(t).state == TokenState::Pending).collect()
    }

    pub fn label(&self, t: TokId) -> String {
        let k = self.token(t);
        format!("{}.{}", self.gd.var(k.var).name, self.gd.value(k.var, k.val).label)
    }

    pub fn describe(&self, f: &Flaw) -> String {
        match f {
            Flaw::Behavior { token: Some(t) } => format!("behavior {} {t}", self.label(*t)),
            Flaw::Behavior { token: None } => "goal rule".into(),
            Flaw::Observation { var } => format!("observation {}", self.gd.var(*var).name),
            Flaw::Goal { token } => format!("goal {} {token}", self.label(*token)),
            Flaw::Threat { a, b } => format!("threat {} {a} / {} {b}", self.label(*a), self.label(*b)),
            Flaw::Gap { var, after, before } => {
                let side = |t: &Option<TokId>| t.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
                format!("gap {} {}..{}", self.gd.var(*var).name, side(after), side(before))
            }
        }
    }

    /// Variable a flaw lives on; `None` for the goal rule.
    pub fn flaw_var(&self, f: &Flaw) -> Option<VarId> {
        match f {
            Flaw::Behavior { token } => token.map(|t| self.token(t).var),
            Flaw::Observation { var } | Flaw::Gap { var, .. } => Some(*var),
            Flaw::Goal { token } => Some(self.token(*token).var),
            Flaw::Threat { a, .. } => Some(self.token(*a).var),
        }
    }

    fn new_token(
        &mut self,
        var: VarId,
        val: ValId,
        origin: Origin,
        state: TokenState,
        executed: bool,
    ) -> Result<TokId, PlanDbError> {
        let v = self.gd.value(var, val);
        let has_rules = self.gd.rules_for(var, val).next().is_some();
        let net = &mut self.state.net;
        let start = net.add_time_point();
        let end = net.add_time_point();
        // Pending tokens take their duration on expansion; unified ones inherit the target's.
        if !executed && state == TokenState::Active {
            net.add_requirement(start, end, v.duration)?;
        }
        let id = TokId(self.state.tokens.len());
        self.state.tokens.push(DbToken {
            var,
            val,
            start,
            end,
            controllability: v.controllability,
            origin,
            state,
            executed,
            rules_applied: !has_rules || origin == Origin::Observation,
            link: None,
        });
        if state == TokenState::Active {
            self.attach_link(id)?;
        }
        Ok(id)
    }

    /// Contingent link for an active uncontrollable token of a planned variable.
    fn attach_link(&mut self, t: TokId) -> Result<(), PlanDbError> {
        let k = &self.state.tokens[t.0];
        if k.executed || k.controllability != Controllability::Uncontrollable || self.gd.var(k.var).kind != VarKind::Planned
        {
            return Ok(());
        }
        let d = self.gd.value(k.var, k.val).duration;
        if d.lb.ticks() == 0 || d.ub.is_infinite() {
            return Ok(());
        }
        let (s, e) = (k.start, k.end);
        let l = self.state.net.mark_contingent(s, e, d.lb, d.ub)?;
        self.state.tokens[t.0].link = Some(l);
        Ok(())
    }

    fn points(&self, t: TokId) -> (PointId, PointId) {
        let k = self.token(t);
        (k.start, k.end)
    }

    fn post(&mut self, left: TokId, relation: Relation, right: Option<TokId>) -> Result<(), PlanDbError> {
        let a = self.points(left);
        let b = right.map(|r| self.points(r)).unwrap_or(a);
        self.state.net.post_relation(&relation, a, b)?;
        self.state.relations.push(DbRelation { left, relation, right });
        Ok(())
    }

    fn meets(&mut self, a: TokId, b: TokId) -> Result<(), PlanDbError> {
        let (ae, bs) = (self.token(a).end, self.token(b).start);
        self.state.net.add_requirement(ae, bs, Bound::point(0))?;
        Ok(())
    }

    /// Instantiates one disjunct: a pending token per slot and a relation per atom.
    fn apply_statement(&mut self, trigger: Option<TokId>, stmt: &GroundStatement, origin: Origin) -> Result<(), PlanDbError> {
        let mut slots: BTreeMap<&str, TokId> = BTreeMap::new();
        for s in &stmt.slots {
            let t = self.new_token(s.var, s.val, origin, TokenState::Pending, false)?;
            slots.insert(&s.name, t);
        }
        let resolve = |op: &Operand| -> Result<TokId, PlanDbError> {
            match op {
                Operand::Trigger => trigger.ok_or_else(|| PlanDbError::NotApplicable("goal rule names a trigger".into())),
                Operand::Var(v) => {
                    slots.get(v.as_str()).copied().ok_or_else(|| PlanDbError::NotApplicable(format!("unbound {v}")))
                }
            }
        };
        for a in &stmt.atoms {
            let l = resolve(&a.left)?;
            let r = a.right.as_ref().map(resolve).transpose()?;
            self.post(l, a.relation.clone(), r)?;
        }
        Ok(())
    }

    fn apply_goal_disjunct(&mut self, k: usize) -> Result<(), PlanDbError> {
        let goal = self.goal.clone();
        let stmt = goal.get(k).ok_or_else(|| PlanDbError::NotApplicable(format!("goal disjunct {k}")))?;
        self.apply_statement(None, stmt, Origin::Goal)?;
        self.state.goal_applied = true;
        Ok(())
    }

    fn apply_rules(&mut self, t: TokId, choice: &[usize]) -> Result<(), PlanDbError> {
        let k = self.token(t).clone();
        let gd = self.gd.clone();
        let rules: Vec<_> = gd.rules_for(k.var, k.val).collect();
        if rules.len() != choice.len() {
            return Err(PlanDbError::NotApplicable(format!("{} rules, {} choices", rules.len(), choice.len())));
        }
        for (r, &c) in rules.iter().zip(choice) {
            let stmt = r.disjuncts.get(c).ok_or_else(|| PlanDbError::NotApplicable(format!("disjunct {c}")))?;
            self.apply_statement(Some(t), stmt, Origin::Expansion)?;
        }
        self.state.tokens[t.0].rules_applied = true;
        Ok(())
    }

    /// Every combination of one disjunct per rule triggered by the token's value.
    fn rule_choices(&self, var: VarId, val: ValId) -> Vec<Vec<usize>> {
        let sizes: Vec<usize> = self.gd.rules_for(var, val).map(|r| r.disjuncts.len()).collect();
        let mut out = vec![vec![]];
        for n in sizes {
            out = out.into_iter().flat_map(|p| (0..n).map(move |i| [p.clone(), vec![i]].concat())).collect();
        }
        out
    }

    /// Applies a refinement, journalling the previous state.
    /// The result may be inconsistent; callers check `is_consistent`.
    pub fn apply(&mut self, r: &Refinement) -> Result<(), PlanDbError> {
        let saved = self.state.clone();
        match self.apply_inner(r) {
            Ok(()) => {
                self.state.net.propagate();
                self.journal.push((r.clone(), saved));
                Ok(())
            }
            Err(e) => {
                self.state = saved;
                Err(e)
            }
        }
    }

    /// Undoes the most recent `apply`.
    pub fn retract(&mut self) -> Result<Refinement, PlanDbError> {
        let (r, s) = self.journal.pop().ok_or(PlanDbError::EmptyJournal)?;
        self.state = s;
        Ok(r)
    }

    fn active(&self, t: TokId) -> Result<(), PlanDbError> {
        match self.state.tokens.get(t.0) {
            Some(k) if k.state == TokenState::Active => Ok(()),
            _ => Err(PlanDbError::NotApplicable(format!("{t} is not an active token"))),
        }
    }

    fn apply_inner(&mut self, r: &Refinement) -> Result<(), PlanDbError> {
        match r {
            Refinement::ApplyRules { token: None, choice } => {
                if self.state.goal_applied {
                    return Err(PlanDbError::NotApplicable("goal already applied".into()));
                }
                self.apply_goal_disjunct(*choice.first().unwrap_or(&0))
            }
            Refinement::ApplyRules { token: Some(t), choice } => {
                self.active(*t)?;
                self.apply_rules(*t, choice)
            }
            Refinement::Expand { token, choice } => {
                let k = self.state.tokens.get(token.0).filter(|k| k.state == TokenState::Pending);
                let Some(k) = k else { return Err(PlanDbError::NotApplicable(format!("{token} is not pending"))) };
                if self.gd.var(k.var).kind == VarKind::External {
                    return Err(PlanDbError::NotApplicable("external goals can only be unified".into()));
                }
                let (s, e, d) = (k.start, k.end, self.gd.value(k.var, k.val).duration);
                self.state.tokens[token.0].state = TokenState::Active;
                self.state.net.add_requirement(s, e, d)?;
                self.attach_link(*token)?;
                self.apply_rules(*token, choice)
            }
            Refinement::Unify { token, with } => {
                self.active(*with)?;
                let (p, a) = (self.token(*token).clone(), self.token(*with).clone());
                if p.state != TokenState::Pending || p.var != a.var || p.val != a.val {
                    return Err(PlanDbError::NotApplicable(format!("{token} cannot unify with {with}")));
                }
                let net = &mut self.state.net;
                net.add_requirement(a.start, p.start, Bound::point(0))?;
                net.add_requirement(a.end, p.end, Bound::point(0))?;
                self.state.tokens[token.0].state = TokenState::Merged(*with);
                for rel in &mut self.state.relations {
                    if rel.left == *token {
                        rel.left = *with;
                    }
                    if rel.right == Some(*token) {
                        rel.right = Some(*with);
                    }
                }
                Ok(())
            }
            Refinement::Verify { var } => {
                self.state.verified.insert(*var);
                Ok(())
            }
            Refinement::Order { first, second } => {
                self.active(*first)?;
                self.active(*second)?;
                let (e, s) = (self.token(*first).end, self.token(*second).start);
                self.state.net.add_requirement(e, s, Bound::at_least(0))?;
                Ok(())
            }
            Refinement::Fill { var, after, before, path } => {
                let mut prev = *after;
                for &v in path {
                    let t = self.new_token(*var, v, Origin::GapFill, TokenState::Active, false)?;
                    if let Some(p) = prev {
                        self.meets(p, t)?;
                    }
                    prev = Some(t);
                }
                if let (Some(p), Some(b)) = (prev, before) {
                    self.meets(p, *b)?;
                }
                Ok(())
            }
            Refinement::PinStart { token } => {
                self.active(*token)?;
                let s = self.token(*token).start;
                self.state.net.add_requirement(ORIGIN, s, Bound::point(0))?;
                Ok(())
            }
            Refinement::PinEnd { token } => {
                self.active(*token)?;
                let e = self.token(*token).end;
                self.state.net.add_requirement(ORIGIN, e, Bound::point(self.horizon))?;
                Ok(())
            }
            Refinement::Seed { var, val } => {
                let t = self.new_token(*var, *val, Origin::GapFill, TokenState::Active, false)?;
                let s = self.token(t).start;
                self.state.net.add_requirement(ORIGIN, s, Bound::point(0))?;
                Ok(())
            }
        }
    }

    /// Whether `r` leaves the network consistent, tested on a scratch copy.
    pub fn admits(&self, r: &Refinement) -> bool {
        // Built field by field: cloning `self` would copy the whole journal.
        let mut scratch = PlanDatabase {
            gd: self.gd.clone(),
            horizon: self.horizon,
            goal: self.goal.clone(),
            observed: self.observed.clone(),
            observed_windows: self.observed_windows.clone(),
            max_gap_path: self.max_gap_path,
            state: self.state.clone(),
            journal: vec![],
        };
        scratch.apply_inner(r).is_ok() && scratch.state.net.propagate() && scratch.is_consistent()
    }

    fn bounds(&self, p: PointId) -> Bound {
        self.state.net.bounds(p).unwrap_or(Bound::unbounded())
    }

    /// `a` entailed to end no later than `b` starts.
    fn entails_before(&self, a: TokId, b: TokId) -> bool {
        matches!(self.state.net.distance(self.token(b).start, self.token(a).end), Ok(Some(d)) if d <= 0)
    }

    fn linked(&self, a: TokId, b: TokId) -> bool {
        matches!(self.state.net.interval(self.token(a).end, self.token(b).start), Ok((0, Some(0))))
    }

    /// Active tokens of `var` ordered by earliest start, then id.
    pub fn timeline(&self, var: VarId) -> Vec<TokId> {
        let mut v: Vec<TokId> = self
            .token_ids()
            .filter(|&t| self.token(t).var == var && self.token(t).state == TokenState::Active)
            .collect();
        v.sort_by_key(|&t| (self.bounds(self.token(t).start).lb, self.bounds(self.token(t).end).lb, t));
        v
    }

    fn threats_on(&self, var: VarId) -> Vec<Flaw> {
        let toks = self.timeline(var);
        let mut out = Vec::new();
        for (i, &a) in toks.iter().enumerate() {
            for &b in &toks[i + 1..] {
                if !self.entails_before(a, b) && !self.entails_before(b, a) {
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    out.push(Flaw::Threat { a, b });
                }
            }
        }
        out
    }

    fn gaps_on(&self, var: VarId) -> Vec<Flaw> {
        let toks = self.timeline(var);
        let planned = self.gd.var(var).kind == VarKind::Planned;
        let mut out = Vec::new();
        let Some((&first, &last)) = toks.first().zip(toks.last()) else {
            if planned {
                out.push(Flaw::Gap { var, after: None, before: None });
            }
            return out;
        };
        if planned && self.bounds(self.token(first).start) != Bound::point(0) {
            out.push(Flaw::Gap { var, after: None, before: Some(first) });
        }
        for w in toks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !self.linked(a, b) || !self.gd.has_transition(var, self.token(a).val, self.token(b).val) {
                out.push(Flaw::Gap { var, after: Some(a), before: Some(b) });
            }
        }
        let l = self.token(last);
        if planned && (self.bounds(l.end) != Bound::point(self.horizon) || l.controllability == Controllability::Uncontrollable)
        {
            out.push(Flaw::Gap { var, after: Some(last), before: None });
        }
        out
    }

    /// The complete flaw set, in deterministic order.
    pub fn detect_flaws(&self) -> Vec<Flaw> {
        let mut out = Vec::new();
        if !self.state.goal_applied {
            out.push(Flaw::Behavior { token: None });
        }
        for t in self.token_ids() {
            let k = self.token(t);
            match k.state {
                TokenState::Active if !k.rules_applied => out.push(Flaw::Behavior { token: Some(t) }),
                TokenState::Pending => out.push(Flaw::Goal { token: t }),
                _ => {}
            }
        }
        for &v in &self.observed {
            if !self.state.verified.contains(&v) {
                out.push(Flaw::Observation { var: v });
            }
        }
        for vi in 0..self.gd.vars.len() {
            let var = VarId(vi);
            let threats = self.threats_on(var);
            if threats.is_empty() {
                out.extend(self.gaps_on(var));
            } else {
                out.extend(threats);
            }
        }
        out
    }

    /// Candidate refinements of a flaw, in preference order, before consistency filtering.
    fn candidates(&self, f: &Flaw) -> Vec<Refinement> {
        match f {
            Flaw::Behavior { token: None } => {
                (0..self.goal.len()).map(|k| Refinement::ApplyRules { token: None, choice: vec![k] }).collect()
            }
            Flaw::Behavior { token: Some(t) } => {
                let k = self.token(*t);
                self.rule_choices(k.var, k.val)
                    .into_iter()
                    .map(|choice| Refinement::ApplyRules { token: Some(*t), choice })
                    .collect()
            }
            Flaw::Observation { var } => vec![Refinement::Verify { var: *var }],
            Flaw::Goal { token } => {
                let k = self.token(*token);
                let mut out: Vec<Refinement> = self
                    .token_ids()
                    .filter(|&o| {
                        let x = self.token(o);
                        x.state == TokenState::Active && x.var == k.var && x.val == k.val
                    })
                    .map(|o| Refinement::Unify { token: *token, with: o })
                    .collect();
                if self.gd.var(k.var).kind == VarKind::Planned {
                    out.extend(
                        self.rule_choices(k.var, k.val)
                            .into_iter()
                            .map(|choice| Refinement::Expand { token: *token, choice }),
                    );
                }
                out
            }
            Flaw::Threat { a, b } => {
                vec![Refinement::Order { first: *a, second: *b }, Refinement::Order { first: *b, second: *a }]
            }
            Flaw::Gap { var, after: None, before: None } => {
                let all = (0..self.gd.var(*var).values.len()).map(ValId).collect();
                self.fillers(*var, all).into_iter().map(|val| Refinement::Seed { var: *var, val }).collect()
            }
            Flaw::Gap { var, after: None, before: Some(b) } => {
                let bv = self.token(*b).val;
                let preds = (0..self.gd.var(*var).values.len())
                    .map(ValId)
                    .filter(|&v| self.gd.has_transition(*var, v, bv))
                    .collect();
                let mut out = vec![Refinement::PinStart { token: *b }];
                for v in self.fillers(*var, preds) {
                    out.push(Refinement::Fill { var: *var, after: None, before: Some(*b), path: vec![v] });
                }
                out
            }
            Flaw::Gap { var, after: Some(a), before: None } => {
                let k = self.token(*a);
                let mut out = Vec::new();
                if k.controllability == Controllability::Controllable {
                    out.push(Refinement::PinEnd { token: *a });
                }
                for v in self.fillers(*var, self.gd.value(*var, k.val).successors.clone()) {
                    out.push(Refinement::Fill { var: *var, after: Some(*a), before: None, path: vec![v] });
                }
                out
            }
            Flaw::Gap { var, after: Some(a), before: Some(b) } => {
                let (av, bv) = (self.token(*a).val, self.token(*b).val);
                self.gd
                    .transition_paths(*var, av, bv, self.max_gap_path)
                    .into_iter()
                    .map(|path| Refinement::Fill { var: *var, after: Some(*a), before: Some(*b), path })
                    .collect()
            }
        }
    }

    /// Filler candidates among `vals`: temporally stable values (unbounded duration, no
    /// triggered rules), else any rule-free value. Values that would open new goals are
    /// never used as fillers.
    fn fillers(&self, var: VarId, vals: Vec<ValId>) -> Vec<ValId> {
        let free: Vec<ValId> = vals.into_iter().filter(|&v| self.gd.rules_for(var, v).next().is_none()).collect();
        let stable: Vec<ValId> = free.iter().copied().filter(|&v| self.gd.value(var, v).duration.ub.is_infinite()).collect();
        if stable.is_empty() {
            free
        } else {
            stable
        }
    }

    /// Consistent refinements of any flaw; an empty list marks a dead end.
    pub fn refinements(&self, f: &Flaw) -> Vec<Refinement> {
        self.candidates(f).into_iter().filter(|r| self.admits(r)).collect()
    }

    /// Unifications first, then one expansion per combination of rule disjuncts.
    pub fn goal_refinements(&self, f: &Flaw) -> Vec<Refinement> {
        match f {
            Flaw::Goal { .. } | Flaw::Behavior { .. } => self.refinements(f),
            _ => vec![],
        }
    }

    pub fn threat_refinements(&self, f: &Flaw) -> Vec<Refinement> {
        match f {
            Flaw::Threat { .. } | Flaw::Gap { .. } => self.refinements(f),
            _ => vec![],
        }
    }

    pub fn is_solution(&self) -> bool {
        self.is_consistent() && self.detect_flaws().is_empty()
    }

    /// Contingent links whose duration the network has narrowed.
    pub fn squeezed_tokens(&self) -> Vec<TokId> {
        self.token_ids()
            .filter(|&t| {
                let k = self.token(t);
                k.state == TokenState::Active && k.link.is_some_and(|l| self.state.net.squeezed(l).unwrap_or(false))
            })
            .collect()
    }

    pub fn is_pseudo_controllable(&self) -> bool {
        self.squeezed_tokens().is_empty()
    }

    /// Largest earliest end over goal-driven tokens of planned variables. A token that
    /// closes its timeline counts by its earliest start, so horizon closure does not
    /// inflate the metric.
    pub fn makespan(&self) -> u64 {
        let last: BTreeSet<TokId> =
            (0..self.gd.vars.len()).filter_map(|v| self.timeline(VarId(v)).last().copied()).collect();
        self.token_ids()
            .filter(|&t| {
                let k = self.token(t);
                matches!(k.origin, Origin::Goal | Origin::Expansion)
                    && !matches!(k.state, TokenState::Merged(_))
                    && self.gd.var(k.var).kind == VarKind::Planned
            })
            .map(|t| {
                let k = self.token(t);
                let p = if last.contains(&t) { k.start } else { k.end };
                self.bounds(p).lb.ticks()
            })
            .max()
            .unwrap_or(0)
    }

    /// Every active token ended at its earliest time.
    pub fn extract_schedule(&self) -> Result<Schedule, PlanDbError> {
        if !self.is_consistent() {
            return Err(PlanDbError::Inconsistent);
        }
        let mut out = Schedule::default();
        for (vi, var) in self.gd.vars.iter().enumerate() {
            let tokens = self
                .timeline(VarId(vi))
                .into_iter()
                .map(|t| ScheduledToken {
                    value: self.gd.value(VarId(vi), self.token(t).val).label.clone(),
                    end: self.bounds(self.token(t).end).lb.ticks(),
                })
                .collect();
            out.timelines.push(ScheduledTimeline { variable: var.name.clone(), tokens });
        }
        Ok(out)
    }

    fn resolve(&self, mut t: TokId) -> TokId {
        while let TokenState::Merged(o) = self.token(t).state {
            t = o;
        }
        t
    }

    /// Flexible plan: network windows for controllable tokens, untouched duration
    /// windows for unsqueezed uncontrollable ones, ℛ restricted to placed tokens.
    pub fn to_plan(&self) -> Result<Plan, PlanDbError> {
        if !self.is_consistent() {
            return Err(PlanDbError::Inconsistent);
        }
        let squeezed: BTreeSet<TokId> = self.squeezed_tokens().into_iter().collect();
        let mut refs: BTreeMap<TokId, TokenRef> = BTreeMap::new();
        let mut timelines = Vec::new();
        for (vi, var) in self.gd.vars.iter().enumerate() {
            let mut tokens: Vec<Token> = Vec::new();
            for (i, t) in self.timeline(VarId(vi)).into_iter().enumerate() {
                refs.insert(t, TokenRef::new(&var.name, i + 1));
                let k = self.token(t);
                let v = self.gd.value(k.var, k.val);
                let start = tokens.last().map(|p| p.end).unwrap_or(Bound::point(0));
                let (duration, end) = if let Some(&(end, duration)) = self.observed_windows.get(&t) {
                    (duration, end)
                } else if var.kind == VarKind::Planned
                    && k.controllability == Controllability::Uncontrollable
                    && !k.executed
                    && !squeezed.contains(&t)
                {
                    required_uncontrollable_windows(start, v.duration)
                } else {
                    (self.state.net.duration_bounds(k.start, k.end)?, self.bounds(k.end))
                };
                tokens.push(Token {
                    value: v.label.clone(),
                    end,
                    duration,
                    controllability: k.controllability,
                    executed: k.executed && k.origin == Origin::Fact,
                });
            }
            timelines.push(Timeline { variable: var.name.clone(), tokens });
        }
        let mut relations: Vec<PlanRelation> = Vec::new();
        for r in &self.state.relations {
            let left = refs.get(&self.resolve(r.left));
            let right = r.right.map(|x| refs.get(&self.resolve(x)));
            let (Some(left), Some(right)) = (left, right.map_or(Some(None), |x| x.map(Some))) else { continue };
            let pr = PlanRelation::new(left.clone(), &r.relation, right.cloned());
            if !relations.contains(&pr) {
                relations.push(pr);
            }
        }
        Ok(Plan {
            domain: self.gd.name.clone(),
            horizon: TimeValue::finite(self.horizon),
            timelines,
            relations,
            pseudo_controllable: squeezed.is_empty(),
        })
    }

    /// Labels of every active token, for tests and traces.
    pub fn summary(&self) -> BTreeMap<String, Vec<String>> {
        let mut out = BTreeMap::new();
        for (vi, var) in self.gd.vars.iter().enumerate() {
            let labels = self.timeline(VarId(vi)).into_iter().map(|t| self.gd.value(VarId(vi), self.token(t).val).label.clone());
            out.insert(var.name.clone(), labels.collect());
        }
        out
    }
}
