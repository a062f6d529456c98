//! Independent checks of schedules, plans and solutions against the formal semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    goal_to_rule, value_label, Controllability, GAtom, GroundDomain, GroundError, GroundRule, GroundStatement,
    Operand, PlanningProblem, ValId, VarId, VarKind,
};
use crate::plan::{Plan, PlanError, Schedule, ScheduledTimeline, Timeline, TokenRef};
use crate::relation::{PointKind, Primitive, PrimitiveKind, Relation};
use crate::stn::ORIGIN;
use crate::time::{Bound, TimeValue};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("no scheduled timeline for {0}")]
    MissingTimeline(String),
    #[error("timeline {0}: {1}")]
    Mismatch(String, String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("plan has no instances")]
    Inconsistent,
    #[error("gave up after {0} rejected samples")]
    RejectionBudget(usize),
}

/// Which requirement a finding violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Coverage,
    Transition,
    Duration,
    Rule,
    Uncontrollable,
    Horizon,
    Goal,
    Observation,
    Fact,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Coverage => "coverage",
            Check::Transition => "transition",
            Check::Duration => "duration",
            Check::Rule => "rule",
            Check::Uncontrollable => "uncontrollable",
            Check::Horizon => "horizon",
            Check::Goal => "goal",
            Check::Observation => "observation",
            Check::Fact => "fact",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub check: Check,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<TokenRef>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.check, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub findings: Vec<Finding>,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, check: Check) -> bool {
        self.findings.iter().any(|f| f.check == check)
    }

    fn push(&mut self, check: Check, token: Option<TokenRef>, message: String) {
        self.findings.push(Finding { check, token, message });
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return writeln!(f, "valid");
        }
        for x in &self.findings {
            writeln!(f, "{x}")?;
        }
        Ok(())
    }
}

/// A satisfying token assignment for one trigger occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub rule: String,
    pub trigger: Option<TokenRef>,
    pub disjunct: usize,
    pub assignment: Vec<(String, TokenRef)>,
}

/// A trigger occurrence no disjunct accounts for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleFailure {
    pub rule: String,
    pub trigger: Option<TokenRef>,
}

impl fmt::Display for RuleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.trigger {
            Some(t) => write!(f, "{} is not satisfied for trigger {t}", self.rule),
            None => write!(f, "{} is not satisfied", self.rule),
        }
    }
}

/// Human-readable name of a ground rule.
pub fn rule_label(gd: &GroundDomain, r: &GroundRule) -> String {
    match r.trigger {
        Some((var, val)) => format!("synchronization on {}.{}", gd.var(var).name, gd.value(var, val).label),
        None => "goal".into(),
    }
}

/// Schedule membership: every end inside its window and every duration inside the token's bounds.
pub fn check_is_schedule(stl: &ScheduledTimeline, ftl: &Timeline) -> Result<bool, ValidationError> {
    if stl.variable != ftl.variable {
        return Err(ValidationError::Mismatch(stl.variable.clone(), format!("compared with {}", ftl.variable)));
    }
    if stl.tokens.len() != ftl.tokens.len() {
        return Err(ValidationError::Mismatch(
            stl.variable.clone(),
            format!("{} scheduled tokens for {} flexible ones", stl.tokens.len(), ftl.tokens.len()),
        ));
    }
    Ok(schedule_violation(stl, ftl).is_none())
}

fn schedule_violation(stl: &ScheduledTimeline, ftl: &Timeline) -> Option<String> {
    for (i, (s, f)) in stl.tokens.iter().zip(&ftl.tokens).enumerate() {
        let iv = stl.interval(i);
        let r = TokenRef::new(&stl.variable, i + 1);
        if s.value != f.value {
            return Some(format!("{r} has value {} instead of {}", s.value, f.value));
        }
        if !f.end.contains(s.end) {
            return Some(format!("{r} ends at {} outside {}", s.end, f.end));
        }
        if !f.duration.contains_signed(iv.end - iv.start) {
            return Some(format!("{r} lasts {} outside {}", iv.end - iv.start, f.duration));
        }
    }
    None
}

/// Token indices of one ground variable in a schedule, by value.
fn index_schedule(
    stl: &Schedule,
    gd: &GroundDomain,
    report: &mut ValidityReport,
) -> Result<BTreeMap<(VarId, ValId), Vec<TokenRef>>, ValidationError> {
    let mut idx: BTreeMap<(VarId, ValId), Vec<TokenRef>> = BTreeMap::new();
    for (vi, var) in gd.vars.iter().enumerate() {
        let tl = stl.timeline(&var.name).ok_or_else(|| ValidationError::MissingTimeline(var.name.clone()))?;
        let var_id = VarId(vi);
        let mut prev: Option<ValId> = None;
        for (i, t) in tl.tokens.iter().enumerate() {
            let r = TokenRef::new(&var.name, i + 1);
            let Some(val) = gd.val_id(var_id, &t.value) else {
                report.push(Check::Coverage, Some(r), format!("{} has no value {}", var.name, t.value));
                prev = None;
                continue;
            };
            if let Some(p) = prev {
                if !gd.has_transition(var_id, p, val) {
                    report.push(
                        Check::Transition,
                        Some(r.clone()),
                        format!("{r}: {} cannot follow {}", t.value, gd.value(var_id, p).label),
                    );
                }
            }
            let iv = tl.interval(i);
            let d = gd.value(var_id, val).duration;
            if !d.contains_signed(iv.end - iv.start) {
                report.push(
                    Check::Duration,
                    Some(r.clone()),
                    format!("{r} lasts {} outside {} for {}", iv.end - iv.start, d, t.value),
                );
            }
            idx.entry((var_id, val)).or_default().push(r);
            prev = Some(val);
        }
    }
    Ok(idx)
}

/// Backtracking search for an assignment of `stmt`'s slots under which `ok` accepts every atom.
fn find_assignment(
    stmt: &GroundStatement,
    trigger: Option<&TokenRef>,
    candidates: &BTreeMap<(VarId, ValId), Vec<TokenRef>>,
    ok: &dyn Fn(&GAtom, &TokenRef, &TokenRef) -> bool,
) -> Option<Vec<(String, TokenRef)>> {
    fn resolve<'a>(op: &Operand, trig: Option<&'a TokenRef>, asg: &'a [(String, TokenRef)]) -> Option<&'a TokenRef> {
        match op {
            Operand::Trigger => trig,
            Operand::Var(v) => asg.iter().find(|(n, _)| n == v).map(|(_, t)| t),
        }
    }
    // Atoms become checkable once the slot with the largest index among their operands is bound.
    let ready_at = |a: &GAtom| -> usize {
        let pos = |op: &Operand| match op {
            Operand::Trigger => 0,
            Operand::Var(v) => stmt.slots.iter().position(|s| s.name == *v).map(|p| p + 1).unwrap_or(usize::MAX),
        };
        pos(&a.left).max(a.right.as_ref().map(pos).unwrap_or(0))
    };
    let check_level = |level: usize, asg: &[(String, TokenRef)]| {
        stmt.atoms.iter().filter(|a| ready_at(a) == level).all(|a| {
            let (Some(l), r) = (resolve(&a.left, trigger, asg), a.right.as_ref().map(|r| resolve(r, trigger, asg)))
            else {
                return false;
            };
            match r {
                Some(Some(r)) => ok(a, l, r),
                Some(None) => false,
                None => ok(a, l, l),
            }
        })
    };
    if stmt.atoms.iter().any(|a| ready_at(a) == usize::MAX) || !check_level(0, &[]) {
        return None;
    }
    fn go(
        k: usize,
        stmt: &GroundStatement,
        candidates: &BTreeMap<(VarId, ValId), Vec<TokenRef>>,
        asg: &mut Vec<(String, TokenRef)>,
        check_level: &dyn Fn(usize, &[(String, TokenRef)]) -> bool,
    ) -> bool {
        if k == stmt.slots.len() {
            return true;
        }
        let s = &stmt.slots[k];
        for t in candidates.get(&(s.var, s.val)).into_iter().flatten() {
            asg.push((s.name.clone(), t.clone()));
            if check_level(k + 1, asg) && go(k + 1, stmt, candidates, asg, check_level) {
                return true;
            }
            asg.pop();
        }
        false
    }
    let mut asg = Vec::new();
    go(0, stmt, candidates, &mut asg, &check_level).then_some(asg)
}

/// Witnesses for every trigger occurrence of `rule`, or the occurrences left unsatisfied.
fn rule_witnesses(
    gd: &GroundDomain,
    rule: &GroundRule,
    candidates: &BTreeMap<(VarId, ValId), Vec<TokenRef>>,
    ok: &dyn Fn(&GAtom, &TokenRef, &TokenRef) -> bool,
) -> Result<Vec<Witness>, Vec<RuleFailure>> {
    let label = rule_label(gd, rule);
    let triggers: Vec<Option<TokenRef>> = match rule.trigger {
        Some(t) => candidates.get(&t).into_iter().flatten().cloned().map(Some).collect(),
        None => vec![None],
    };
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    for trig in triggers {
        let found = rule
            .disjuncts
            .iter()
            .enumerate()
            .find_map(|(k, d)| find_assignment(d, trig.as_ref(), candidates, ok).map(|a| (k, a)));
        match found {
            Some((disjunct, assignment)) => {
                witnesses.push(Witness { rule: label.clone(), trigger: trig, disjunct, assignment })
            }
            None => failures.push(RuleFailure { rule: label.clone(), trigger: trig }),
        }
    }
    if failures.is_empty() {
        Ok(witnesses)
    } else {
        Err(failures)
    }
}

/// Domain validity of a set of scheduled timelines: well-formed timelines and every rule satisfied.
pub fn check_scheduled_validity(stl: &Schedule, gd: &GroundDomain) -> Result<ValidityReport, ValidationError> {
    let mut report = ValidityReport::default();
    let idx = index_schedule(stl, gd, &mut report)?;
    for rule in &gd.rules {
        scheduled_rule(stl, gd, rule, &idx, &mut report);
    }
    Ok(report)
}

fn scheduled_rule(
    stl: &Schedule,
    gd: &GroundDomain,
    rule: &GroundRule,
    idx: &BTreeMap<(VarId, ValId), Vec<TokenRef>>,
    report: &mut ValidityReport,
) {
    let ok = |a: &GAtom, l: &TokenRef, r: &TokenRef| match (stl.interval(l), stl.interval(r)) {
        (Some(x), Some(y)) => a.relation.holds(x, y),
        _ => false,
    };
    if let Err(fails) = rule_witnesses(gd, rule, idx, &ok) {
        for f in fails {
            report.push(Check::Rule, f.trigger.clone(), f.to_string());
        }
    }
}

/// Whether a set of scheduled timelines fulfils the problem's goal.
pub fn check_goal_fulfilled(stl: &Schedule, problem: &PlanningProblem) -> Result<ValidityReport, ValidationError> {
    let gd = GroundDomain::new(&problem.domain)?;
    let mut report = ValidityReport::default();
    let mut scratch = ValidityReport::default();
    let idx = index_schedule(stl, &gd, &mut scratch)?;
    for rule in gd.ground_rule(&goal_to_rule(&problem.goal))? {
        scheduled_rule(stl, &gd, &rule, &idx, &mut report);
    }
    for f in &mut report.findings {
        f.check = Check::Goal;
    }
    Ok(report)
}

/// Instance membership: a schedule of every timeline that satisfies every relation in ℛ.
pub fn check_instance(stl: &Schedule, plan: &Plan) -> Result<bool, ValidationError> {
    if stl.timelines.len() != plan.timelines.len() {
        return Err(ValidationError::Mismatch(
            "*".into(),
            format!("{} scheduled timelines for {} flexible ones", stl.timelines.len(), plan.timelines.len()),
        ));
    }
    for ftl in &plan.timelines {
        let s = stl.timeline(&ftl.variable).ok_or_else(|| ValidationError::MissingTimeline(ftl.variable.clone()))?;
        if !check_is_schedule(s, ftl)? {
            return Ok(false);
        }
    }
    for r in &plan.relations {
        plan.locate(&r.left)?;
        let a = stl.interval(&r.left).ok_or_else(|| PlanError::UnknownToken(r.left.clone()))?;
        let b = match &r.right {
            Some(rr) => stl.interval(rr).ok_or_else(|| PlanError::UnknownToken(rr.clone()))?,
            None => a,
        };
        if !r.relation().holds(a, b) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Side {
    Start,
    End,
}

/// A primitive constraint between token endpoints, the unit of syntactic matching.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Pair { from: (TokenRef, Side), to: (TokenRef, Side), bound: Bound },
    Point { at: (TokenRef, Side), anchor: u64, bound: Bound },
}

fn edges(r: &Relation, a: &TokenRef, b: &TokenRef) -> Vec<Edge> {
    let Ok(prims) = r.expand() else { return vec![] };
    prims
        .into_iter()
        .map(|p| match p {
            Primitive::Pair { kind, bound, swapped } => {
                let (x, y) = if swapped { (b, a) } else { (a, b) };
                let (sx, sy) = match kind {
                    PrimitiveKind::StartBeforeStart => (Side::Start, Side::Start),
                    PrimitiveKind::EndBeforeEnd => (Side::End, Side::End),
                    PrimitiveKind::StartBeforeEnd => (Side::Start, Side::End),
                    PrimitiveKind::EndBeforeStart => (Side::End, Side::Start),
                };
                Edge::Pair { from: (x.clone(), sx), to: (y.clone(), sy), bound }
            }
            Primitive::Point { kind, bound, anchor } => {
                let side = match kind {
                    PointKind::StartsBefore => Side::Start,
                    PointKind::EndsBefore => Side::End,
                };
                Edge::Point { at: (a.clone(), side), anchor, bound }
            }
        })
        .collect()
}

/// Token index of a flexible plan by ground value; tokens with unknown values are skipped.
fn index_plan(plan: &Plan, gd: &GroundDomain) -> BTreeMap<(VarId, ValId), Vec<TokenRef>> {
    let mut idx: BTreeMap<(VarId, ValId), Vec<TokenRef>> = BTreeMap::new();
    for tl in &plan.timelines {
        let Some(var) = gd.var_id(&tl.variable) else { continue };
        for (i, t) in tl.tokens.iter().enumerate() {
            if let Some(val) = gd.val_id(var, &t.value) {
                idx.entry((var, val)).or_default().push(TokenRef::new(&tl.variable, i + 1));
            }
        }
    }
    idx
}

/// Rule satisfaction by a flexible plan: every atom, expanded to primitives, must be present in ℛ.
pub fn check_plan_satisfies_rule(
    plan: &Plan,
    gd: &GroundDomain,
    rule: &GroundRule,
) -> Result<Vec<Witness>, Vec<RuleFailure>> {
    let committed: BTreeSet<Edge> = plan
        .relations
        .iter()
        .flat_map(|r| edges(&r.relation(), &r.left, r.right.as_ref().unwrap_or(&r.left)))
        .collect();
    let idx = index_plan(plan, gd);
    let ok = |a: &GAtom, l: &TokenRef, r: &TokenRef| {
        let need = edges(&a.relation, l, r);
        !need.is_empty() && need.iter().all(|e| committed.contains(e))
    };
    rule_witnesses(gd, rule, &idx, &ok)
}

/// Required windows of an uncontrollable token whose start window is `start`.
pub fn required_uncontrollable_windows(start: Bound, d: Bound) -> (Bound, Bound) {
    (d, Bound { lb: start.lb.saturating_add(d.lb), ub: start.ub.saturating_add(d.ub) })
}

/// Plan validity: timeline coverage, rule satisfaction, and untouched uncontrollable durations.
pub fn check_plan_validity(plan: &Plan, gd: &GroundDomain) -> ValidityReport {
    let mut report = ValidityReport::default();
    for var in &gd.vars {
        let n = plan.timelines.iter().filter(|t| t.variable == var.name).count();
        if n != 1 {
            report.push(Check::Coverage, None, format!("{} timelines for {}", n, var.name));
        }
    }
    for tl in &plan.timelines {
        let Some(var) = gd.var_id(&tl.variable) else {
            report.push(Check::Coverage, None, format!("timeline for unknown variable {}", tl.variable));
            continue;
        };
        let mut prev: Option<ValId> = None;
        for (i, t) in tl.tokens.iter().enumerate() {
            let r = TokenRef::new(&tl.variable, i + 1);
            let Some(val) = gd.val_id(var, &t.value) else {
                report.push(Check::Coverage, Some(r.clone()), format!("{r} has unknown value {}", t.value));
                prev = None;
                continue;
            };
            if let Some(p) = prev {
                if !gd.has_transition(var, p, val) {
                    let msg = format!("{r}: {} cannot follow {}", t.value, gd.value(var, p).label);
                    report.push(Check::Transition, Some(r.clone()), msg);
                }
            }
            prev = Some(val);
            let v = gd.value(var, val);
            if gd.var(var).kind == VarKind::Planned && v.controllability == Controllability::Uncontrollable && !t.executed
            {
                let (dur, end) = required_uncontrollable_windows(tl.start_window(i), v.duration);
                if t.duration != dur || t.end != end {
                    let msg = format!(
                        "{r} ({}) has duration {} and end {}, required {dur} and {end}",
                        t.value, t.duration, t.end
                    );
                    report.push(Check::Uncontrollable, Some(r), msg);
                }
            }
        }
    }
    for rule in &gd.rules {
        if let Err(fails) = check_plan_satisfies_rule(plan, gd, rule) {
            for f in fails {
                report.push(Check::Rule, f.trigger.clone(), f.to_string());
            }
        }
    }
    report
}

/// Solution conditions: horizons fixed at H, validity, goal satisfaction, observations untouched.
pub fn check_solution(plan: &Plan, problem: &PlanningProblem) -> Result<ValidityReport, ValidationError> {
    let gd = GroundDomain::new(&problem.domain)?;
    let h = problem.horizon;
    let mut report = ValidityReport::default();
    if plan.horizon != h {
        report.push(Check::Horizon, None, format!("plan horizon {} differs from {h}", plan.horizon));
    }
    for var in gd.vars.iter().filter(|v| v.kind == VarKind::Planned) {
        if let Some(tl) = plan.timeline(&var.name) {
            let hz = tl.horizon();
            if hz != Bound::point(h.ticks()) {
                report.push(Check::Horizon, None, format!("timeline {} has horizon {hz}, expected [{h}, {h}]", var.name));
            }
        }
    }
    report.findings.extend(check_plan_validity(plan, &gd).findings);
    for rule in gd.ground_rule(&goal_to_rule(&problem.goal))? {
        if let Err(fails) = check_plan_satisfies_rule(plan, &gd, &rule) {
            for f in fails {
                report.push(Check::Goal, None, f.to_string());
            }
        }
    }
    for obs in &problem.observations {
        let Some(tl) = plan.timeline(&obs.component) else {
            report.push(Check::Observation, None, format!("observation timeline {} missing", obs.component));
            continue;
        };
        let same = tl.tokens.len() == obs.tokens.len()
            && tl.tokens.iter().zip(&obs.tokens).enumerate().all(|(i, (t, o))| {
                t.value == value_label(&o.value.name, &o.value.args)
                    && t.end == o.end
                    && t.duration == o.duration
                    && tl.start_window(i) == o.start
            });
        if !same {
            report.push(Check::Observation, None, format!("timeline {} differs from its observation", obs.component));
        }
    }
    for f in &problem.facts {
        let label = value_label(&f.value.name, &f.value.args);
        let found = plan.timeline(&f.component).is_some_and(|tl| {
            tl.tokens.iter().enumerate().any(|(i, t)| {
                t.value == label
                    && tl.start_window(i).is_subset_of(&f.window.start)
                    && t.end.is_subset_of(&f.window.end)
                    && t.duration.is_subset_of(&f.window.duration)
            })
        });
        if !found {
            report.push(Check::Fact, None, format!("fact {} is not represented", f.name));
        }
    }
    Ok(report)
}

/// Planned uncontrollable tokens whose duration window differs from their value's bounds.
pub fn check_pseudo_controllability(plan: &Plan, gd: &GroundDomain) -> Vec<TokenRef> {
    let mut out = Vec::new();
    for tl in &plan.timelines {
        let Some(var) = gd.var_id(&tl.variable) else { continue };
        if gd.var(var).kind != VarKind::Planned {
            continue;
        }
        for (i, t) in tl.tokens.iter().enumerate() {
            let Some(val) = gd.val_id(var, &t.value) else { continue };
            let v = gd.value(var, val);
            if v.controllability == Controllability::Uncontrollable && !t.executed && t.duration != v.duration {
                out.push(TokenRef::new(&tl.variable, i + 1));
            }
        }
    }
    out
}

/// `n` random instances: ends are fixed one at a time in chronological order, each drawn
/// uniformly from its current minimal-network window, then double-checked with `check_instance`.
pub fn sample_instances(plan: &Plan, n: usize, seed: u64) -> Result<Vec<Schedule>, ValidationError> {
    let mut pn = plan.network()?;
    if !pn.net.propagate() {
        return Err(ValidationError::Inconsistent);
    }
    let span = plan.horizon.get().unwrap_or(TimeValue::MAX_FINITE).max(1);
    let mut order: Vec<(u64, usize, usize)> = Vec::new();
    for (ti, row) in pn.ends.iter().enumerate() {
        for (i, &p) in row.iter().enumerate() {
            order.push((pn.net.bounds(p).map_err(PlanError::from)?.lb.ticks(), ti, i));
        }
    }
    order.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let budget = 10 * n.max(1);
    let mut rejected = 0;
    while out.len() < n {
        let mut net = pn.net.clone();
        let mut ends: Vec<Vec<u64>> = pn.ends.iter().map(|r| vec![0; r.len()]).collect();
        for &(_, ti, i) in &order {
            let p = pn.ends[ti][i];
            let b = net.bounds(p).map_err(PlanError::from)?;
            let lo = b.lb.ticks();
            let hi = b.ub.get().unwrap_or(lo + span);
            let t = rng.gen_range(lo..=hi);
            net.add_requirement(ORIGIN, p, Bound::point(t)).map_err(PlanError::from)?;
            if !net.propagate() {
                return Err(ValidationError::Inconsistent);
            }
            ends[ti][i] = t;
        }
        let s = Schedule {
            timelines: plan
                .timelines
                .iter()
                .zip(&ends)
                .map(|(tl, e)| ScheduledTimeline {
                    variable: tl.variable.clone(),
                    tokens: tl
                        .tokens
                        .iter()
                        .zip(e)
                        .map(|(t, &end)| crate::plan::ScheduledToken { value: t.value.clone(), end })
                        .collect(),
                })
                .collect(),
        };
        if check_instance(&s, plan)? {
            out.push(s);
        } else {
            rejected += 1;
            if rejected > budget {
                return Err(ValidationError::RejectionBudget(rejected));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::Token;

    fn single(value: &str, start_prev: Option<Bound>, end: Bound, duration: Bound) -> Plan {
        let mut tokens = Vec::new();
        if let Some(b) = start_prev {
            tokens.push(Token {
                value: "Idle".into(),
                end: b,
                duration: Bound::at_least(1),
                controllability: Controllability::Controllable,
                executed: false,
            });
        }
        tokens.push(Token {
            value: value.into(),
            end,
            duration,
            controllability: Controllability::Uncontrollable,
            executed: false,
        });
        Plan {
            domain: "D".into(),
            horizon: 100.into(),
            timelines: vec![Timeline { variable: "x".into(), tokens }],
            relations: vec![],
            pseudo_controllable: true,
        }
    }

    #[test]
    fn uncontrollable_windows_follow_start_window() {
        let (d, e) = required_uncontrollable_windows(Bound::closed(10, 20), Bound::closed(5, 8));
        assert_eq!(d, Bound::closed(5, 8));
        assert_eq!(e, Bound::closed(15, 28));
    }

    #[test]
    fn rigid_plan_has_a_single_instance() {
        let p = single("Work", Some(Bound::point(10)), Bound::point(15), Bound::point(5));
        let s = sample_instances(&p, 3, 7).unwrap();
        assert!(s.iter().all(|x| x == &s[0]));
        assert_eq!(s[0].timelines[0].tokens[1].end, 15);
    }

    #[test]
    fn inconsistent_plan_cannot_be_sampled() {
        let p = single("Work", Some(Bound::point(10)), Bound::point(12), Bound::point(5));
        assert!(matches!(sample_instances(&p, 1, 0), Err(ValidationError::Inconsistent)));
    }

    #[test]
    fn empty_relation_set_makes_instances_schedules() {
        let p = single("Work", Some(Bound::closed(5, 10)), Bound::closed(10, 20), Bound::closed(2, 8));
        let s = Schedule::from_rows(&[("x", &[("Idle", 7), ("Work", 12)])]);
        assert_eq!(check_instance(&s, &p).unwrap(), check_is_schedule(&s.timelines[0], &p.timelines[0]).unwrap());
        assert!(check_instance(&s, &p).unwrap());
    }
}
