//! Eager grounding of parameterized values, transitions and rules, and the indexed ground form.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{
    Atom, ConstraintOp, Controllability, ExistentialStatement, Operand, ParamKind, ParameterConstraint,
    ParameterDomain, PlanningDomain, StateVariableType, Successor, SynchronizationRule, Term, TokenVar, ValueDecl,
    ValuePattern, VarKind,
};
use crate::relation::Relation;
use crate::time::{Bound, TimeValue};

pub const MAX_NUMERIC_VALUES: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error("numeric parameter {0} has more than {MAX_NUMERIC_VALUES} values")]
    TooLarge(String),
    #[error("unknown component {0}")]
    UnknownComponent(String),
    #[error("unknown type {0}")]
    UnknownType(String),
    #[error("{0} has no value {1}")]
    UnknownValue(String, String),
    #[error("unknown parameter type {0}")]
    UnknownParameter(String),
    #[error("{0} expects {1} argument(s), got {2}")]
    Arity(String, usize, usize),
    #[error("?{0} is used with incompatible parameter types")]
    TypeClash(String),
    #[error("{0} is not a member of {1}")]
    NotMember(String, String),
    #[error("?{0} is not bound by any value")]
    Unbound(String),
}

/// Ground label of a value: bare name without arguments, `Name(a,b)` otherwise.
pub fn value_label(name: &str, args: &[Term]) -> String {
    if args.is_empty() {
        return name.to_string();
    }
    let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
    format!("{}({})", name, parts.join(","))
}

type Binding = BTreeMap<String, Term>;

fn resolve<'t>(t: &'t Term, b: &'t Binding) -> Option<&'t Term> {
    match t {
        Term::Var(v) => b.get(v),
        lit => Some(lit),
    }
}

/// `Some(verdict)` once both sides are known.
fn eval(c: &ParameterConstraint, b: &Binding) -> Option<bool> {
    let (l, r) = (resolve(&c.left, b)?, resolve(&c.right, b)?);
    Some(match c.op {
        ConstraintOp::Equal => l == r,
        ConstraintOp::NotEqual => l != r,
    })
}

fn instantiate(p: &ValuePattern, b: &Binding) -> Result<String, GroundError> {
    let args = p
        .args
        .iter()
        .map(|a| resolve(a, b).cloned().ok_or_else(|| GroundError::Unbound(a.var().unwrap_or("").into())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(value_label(&p.name, &args))
}

struct Grounder<'a> {
    d: &'a PlanningDomain,
}

impl<'a> Grounder<'a> {
    fn param(&self, name: &str) -> Result<&'a ParameterDomain, GroundError> {
        let p = self.d.parameter(name).ok_or_else(|| GroundError::UnknownParameter(name.into()))?;
        if matches!(p.kind, ParamKind::Numeric { .. }) && p.size() > MAX_NUMERIC_VALUES as u64 {
            return Err(GroundError::TooLarge(name.into()));
        }
        Ok(p)
    }

    fn ty(&self, component: &str) -> Result<&'a StateVariableType, GroundError> {
        let c = self
            .d
            .components
            .iter()
            .find(|c| c.name == component)
            .ok_or_else(|| GroundError::UnknownComponent(component.into()))?;
        self.d.type_named(&c.type_name).ok_or_else(|| GroundError::UnknownType(c.type_name.clone()))
    }

    /// Types of the variables of `p` as a value of `ty`, merged into `out`.
    fn type_pattern(
        &self,
        ty: &'a StateVariableType,
        p: &ValuePattern,
        out: &mut Vec<(String, &'a ParameterDomain)>,
    ) -> Result<(), GroundError> {
        let v = ty.value(&p.name).ok_or_else(|| GroundError::UnknownValue(ty.name.clone(), p.name.clone()))?;
        if v.params.len() != p.args.len() {
            return Err(GroundError::Arity(p.name.clone(), v.params.len(), p.args.len()));
        }
        for (arg, pname) in p.args.iter().zip(&v.params) {
            let pd = self.param(pname)?;
            match arg {
                Term::Var(x) => match out.iter().find(|(n, _)| n == x) {
                    Some((_, prev)) if prev.name != pd.name => return Err(GroundError::TypeClash(x.clone())),
                    Some(_) => {}
                    None => out.push((x.clone(), pd)),
                },
                lit if !pd.admits(lit) => return Err(GroundError::NotMember(lit.to_string(), pd.name.clone())),
                _ => {}
            }
        }
        Ok(())
    }

    /// Every extension of `base` over `free` satisfying all decidable constraints.
    fn enumerate(
        &self,
        free: &[(String, &ParameterDomain)],
        constraints: &[ParameterConstraint],
        base: &Binding,
    ) -> Result<Vec<Binding>, GroundError> {
        for c in constraints {
            for v in c.vars() {
                if !base.contains_key(v) && !free.iter().any(|(n, _)| n == v) {
                    return Err(GroundError::Unbound(v.into()));
                }
            }
        }
        let mut out = Vec::new();
        let mut b = base.clone();
        self.extend(free, constraints, &mut b, &mut out);
        Ok(out)
    }

    fn extend(
        &self,
        free: &[(String, &ParameterDomain)],
        constraints: &[ParameterConstraint],
        b: &mut Binding,
        out: &mut Vec<Binding>,
    ) {
        if constraints.iter().any(|c| eval(c, b) == Some(false)) {
            return;
        }
        let Some(((name, pd), rest)) = free.split_first() else {
            out.push(b.clone());
            return;
        };
        for m in pd.members() {
            b.insert(name.clone(), m);
            self.extend(rest, constraints, b, out);
        }
        b.remove(name);
    }

    fn value_bindings(&self, ty: &'a StateVariableType, v: &ValueDecl) -> Result<Vec<Binding>, GroundError> {
        let mut free = Vec::new();
        self.type_pattern(ty, &ValuePattern { name: v.name.clone(), args: v.args.clone() }, &mut free)?;
        self.enumerate(&free, &[], &Binding::new())
    }

    fn ground_type(&self, ty: &'a StateVariableType) -> Result<StateVariableType, GroundError> {
        let mut values = Vec::new();
        for v in &ty.values {
            for b in self.value_bindings(ty, v)? {
                let label = instantiate(&ValuePattern { name: v.name.clone(), args: v.args.clone() }, &b)?;
                let mut succ: Vec<String> = Vec::new();
                for s in &v.successors {
                    let mut free = Vec::new();
                    self.type_pattern(ty, &s.pattern, &mut free)?;
                    free.retain(|(n, _)| !b.contains_key(n));
                    for sb in self.enumerate(&free, &s.constraints, &b)? {
                        let l = instantiate(&s.pattern, &sb)?;
                        if !succ.contains(&l) {
                            succ.push(l);
                        }
                    }
                }
                values.push(ValueDecl {
                    name: label,
                    params: vec![],
                    args: vec![],
                    duration: v.duration,
                    controllability: v.controllability,
                    successors: succ
                        .into_iter()
                        .map(|l| Successor { pattern: ValuePattern::plain(&l), constraints: vec![] })
                        .collect(),
                });
            }
        }
        Ok(StateVariableType { name: ty.name.clone(), kind: ty.kind, values })
    }

    fn ground_var(&self, t: &TokenVar, b: &Binding) -> Result<TokenVar, GroundError> {
        Ok(TokenVar { name: t.name.clone(), component: t.component.clone(), value: ValuePattern::plain(&instantiate(&t.value, b)?) })
    }

    /// One ground rule per trigger instance, one ground disjunct per consistent binding.
    fn ground_rule(&self, r: &SynchronizationRule) -> Result<Vec<SynchronizationRule>, GroundError> {
        let triggers = match &r.trigger {
            None => vec![(None, Binding::new())],
            Some(t) => {
                let ty = self.ty(&t.component)?;
                let mut free = Vec::new();
                self.type_pattern(ty, &t.value, &mut free)?;
                self.enumerate(&free, &[], &Binding::new())?
                    .into_iter()
                    .map(|b| Ok((Some(self.ground_var(t, &b)?), b)))
                    .collect::<Result<Vec<_>, GroundError>>()?
            }
        };
        let mut out = Vec::new();
        for (trigger, tb) in triggers {
            let mut disjuncts = Vec::new();
            for s in &r.disjuncts {
                let mut free = Vec::new();
                for v in &s.vars {
                    self.type_pattern(self.ty(&v.component)?, &v.value, &mut free)?;
                }
                free.retain(|(n, _)| !tb.contains_key(n));
                for b in self.enumerate(&free, &s.constraints, &tb)? {
                    disjuncts.push(ExistentialStatement {
                        vars: s.vars.iter().map(|v| self.ground_var(v, &b)).collect::<Result<_, _>>()?,
                        atoms: s.atoms.clone(),
                        constraints: vec![],
                    });
                }
            }
            out.push(SynchronizationRule { trigger, disjuncts });
        }
        Ok(out)
    }
}

/// Replace every parameterized value by its instances; transitions and rules follow.
pub fn ground(d: &PlanningDomain) -> Result<PlanningDomain, GroundError> {
    let g = Grounder { d };
    for p in &d.parameters {
        g.param(&p.name)?;
    }
    let types = d.types.iter().map(|t| g.ground_type(t)).collect::<Result<Vec<_>, _>>()?;
    let mut rules = Vec::new();
    for r in &d.rules {
        rules.extend(g.ground_rule(r)?);
    }
    Ok(PlanningDomain {
        name: d.name.clone(),
        temporal_module: d.temporal_module.clone(),
        horizon: d.horizon,
        parameters: d.parameters.clone(),
        types,
        components: d.components.clone(),
        rules,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct ValId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundValue {
    pub label: String,
    pub duration: Bound,
    pub controllability: Controllability,
    pub successors: Vec<ValId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundVar {
    pub name: String,
    pub kind: VarKind,
    pub values: Vec<GroundValue>,
}

/// Annotated token variable of a ground rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub var: VarId,
    pub val: ValId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GAtom {
    pub left: Operand,
    pub relation: Relation,
    pub right: Option<Operand>,
}

/// Existential statement over ground slots; no atoms means ⊤.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundStatement {
    pub slots: Vec<Slot>,
    pub atoms: Vec<GAtom>,
}

impl GroundStatement {
    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundRule {
    pub trigger: Option<(VarId, ValId)>,
    pub disjuncts: Vec<GroundStatement>,
}

/// Indexed ground domain shared by the plan database, validator and executor.
#[derive(Clone, Debug)]
pub struct GroundDomain {
    pub name: String,
    pub horizon: TimeValue,
    pub vars: Vec<GroundVar>,
    pub rules: Vec<GroundRule>,
    source: PlanningDomain,
    by_trigger: BTreeMap<(VarId, ValId), Vec<usize>>,
}

impl GroundDomain {
    pub fn new(d: &PlanningDomain) -> Result<GroundDomain, GroundError> {
        let gd = ground(d)?;
        let mut vars = Vec::new();
        for c in &gd.components {
            let ty = gd.type_named(&c.type_name).ok_or_else(|| GroundError::UnknownType(c.type_name.clone()))?;
            let index: BTreeMap<&str, usize> = ty.values.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
            let values = ty
                .values
                .iter()
                .map(|v| GroundValue {
                    label: v.name.clone(),
                    duration: v.duration,
                    controllability: v.controllability,
                    successors: v
                        .successors
                        .iter()
                        .filter_map(|s| index.get(s.pattern.name.as_str()).map(|&i| ValId(i)))
                        .collect(),
                })
                .collect();
            vars.push(GroundVar { name: c.name.clone(), kind: ty.kind, values });
        }
        let mut g = GroundDomain {
            name: d.name.clone(),
            horizon: d.horizon,
            vars,
            rules: vec![],
            source: d.clone(),
            by_trigger: BTreeMap::new(),
        };
        for r in &gd.rules {
            let rule = g.index_rule(r)?;
            if let Some(t) = rule.trigger {
                g.by_trigger.entry(t).or_default().push(g.rules.len());
            }
            g.rules.push(rule);
        }
        Ok(g)
    }

    pub fn source(&self) -> &PlanningDomain {
        &self.source
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn var(&self, id: VarId) -> &GroundVar {
        &self.vars[id.0]
    }

    pub fn value(&self, var: VarId, val: ValId) -> &GroundValue {
        &self.vars[var.0].values[val.0]
    }

    pub fn val_id(&self, var: VarId, label: &str) -> Option<ValId> {
        self.vars[var.0].values.iter().position(|v| v.label == label).map(ValId)
    }

    /// Resolve `component` and a fully bound pattern.
    pub fn resolve(&self, component: &str, p: &ValuePattern) -> Result<(VarId, ValId), GroundError> {
        let var = self.var_id(component).ok_or_else(|| GroundError::UnknownComponent(component.into()))?;
        let label = instantiate(p, &Binding::new())?;
        let val = self.val_id(var, &label).ok_or_else(|| GroundError::UnknownValue(component.into(), label))?;
        Ok((var, val))
    }

    pub fn rules_for(&self, var: VarId, val: ValId) -> impl Iterator<Item = &GroundRule> {
        self.by_trigger.get(&(var, val)).into_iter().flatten().map(|&i| &self.rules[i])
    }

    pub fn has_transition(&self, var: VarId, from: ValId, to: ValId) -> bool {
        self.value(var, from).successors.contains(&to)
    }

    /// Shortest value paths `from → … → to` with at most `max_inner` intermediate values.
    pub fn transition_paths(&self, var: VarId, from: ValId, to: ValId, max_inner: usize) -> Vec<Vec<ValId>> {
        // Layered BFS: all shortest paths, in successor order.
        let mut frontier: Vec<Vec<ValId>> = vec![vec![]];
        let mut visited: BTreeSet<ValId> = BTreeSet::from([from]);
        for _ in 0..=max_inner {
            let mut found = Vec::new();
            let mut next = Vec::new();
            let mut layer = BTreeSet::new();
            for path in &frontier {
                let last = path.last().copied().unwrap_or(from);
                for &s in &self.value(var, last).successors {
                    if s == to {
                        found.push(path.clone());
                    } else if !visited.contains(&s) {
                        layer.insert(s);
                        let mut p = path.clone();
                        p.push(s);
                        next.push(p);
                    }
                }
            }
            if !found.is_empty() {
                return found;
            }
            visited.extend(layer);
            frontier = next;
        }
        vec![]
    }

    /// Ground a rule written against the source domain (goal rules).
    pub fn ground_rule(&self, r: &SynchronizationRule) -> Result<Vec<GroundRule>, GroundError> {
        let g = Grounder { d: &self.source };
        g.ground_rule(r)?.iter().map(|r| self.index_rule(r)).collect()
    }

    fn index_rule(&self, r: &SynchronizationRule) -> Result<GroundRule, GroundError> {
        let trigger = r.trigger.as_ref().map(|t| self.resolve(&t.component, &t.value)).transpose()?;
        let disjuncts = r
            .disjuncts
            .iter()
            .map(|s| {
                let slots = s
                    .vars
                    .iter()
                    .map(|v| {
                        let (var, val) = self.resolve(&v.component, &v.value)?;
                        Ok(Slot { name: v.name.clone(), var, val })
                    })
                    .collect::<Result<Vec<_>, GroundError>>()?;
                let atoms = s
                    .atoms
                    .iter()
                    .filter_map(|a| match a {
                        Atom::True => None,
                        Atom::Rel { left, relation, right } => {
                            Some(GAtom { left: left.clone(), relation: relation.clone(), right: right.clone() })
                        }
                    })
                    .collect();
                Ok(GroundStatement { slots, atoms })
            })
            .collect::<Result<Vec<_>, GroundError>>()?;
        Ok(GroundRule { trigger, disjuncts })
    }
}

/// Minimal two-location navigation domain used by unit tests across modules.
#[cfg(test)]
pub(crate) fn nav_domain(locations: &[&str]) -> PlanningDomain {
    use super::{Component, ParameterDomain};
    let var = |s: &str| Term::Var(s.into());
    PlanningDomain {
        name: "Nav".into(),
        temporal_module: "tm".into(),
        horizon: 100.into(),
        parameters: vec![ParameterDomain {
            name: "location".into(),
            kind: ParamKind::Enumeration(locations.iter().map(|s| s.to_string()).collect()),
        }],
        types: vec![StateVariableType {
            name: "NavigationType".into(),
            kind: VarKind::Planned,
            values: vec![
                ValueDecl {
                    name: "At".into(),
                    params: vec!["location".into()],
                    args: vec![var("location")],
                    duration: Bound::at_least(1),
                    controllability: Controllability::Controllable,
                    successors: vec![Successor {
                        pattern: ValuePattern { name: "GoingTo".into(), args: vec![var("destination")] },
                        constraints: vec![ParameterConstraint {
                            op: ConstraintOp::NotEqual,
                            left: var("location"),
                            right: var("destination"),
                        }],
                    }],
                },
                ValueDecl {
                    name: "GoingTo".into(),
                    params: vec!["location".into()],
                    args: vec![var("location")],
                    duration: Bound::closed(5, 11),
                    controllability: Controllability::Uncontrollable,
                    successors: vec![Successor {
                        pattern: ValuePattern { name: "At".into(), args: vec![var("destination")] },
                        constraints: vec![ParameterConstraint {
                            op: ConstraintOp::Equal,
                            left: var("destination"),
                            right: var("location"),
                        }],
                    }],
                },
            ],
        }],
        components: vec![Component { name: "Navigation".into(), type_name: "NavigationType".into() }],
        rules: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIVE: [&str; 5] = ["home", "location1", "location2", "location3", "location4"];

    #[test]
    fn navigation_grounds_to_five_values_each() {
        let g = ground(&nav_domain(&FIVE)).unwrap();
        let names: Vec<&str> = g.types[0].values.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names.iter().filter(|n| n.starts_with("At(")).count(), 5);
        assert_eq!(names.iter().filter(|n| n.starts_with("GoingTo(")).count(), 5);
        assert_eq!(names[0], "At(home)");
    }

    #[test]
    fn inequality_yields_twenty_transitions() {
        let g = ground(&nav_domain(&FIVE)).unwrap();
        // Oracle: count ordered pairs of distinct locations directly.
        let expected = FIVE.iter().flat_map(|a| FIVE.iter().map(move |b| (a, b))).filter(|(a, b)| a != b).count();
        let pairs: usize = g.types[0]
            .values
            .iter()
            .filter(|v| v.name.starts_with("At("))
            .map(|v| v.successors.len())
            .sum();
        assert_eq!(pairs, expected);
        assert_eq!(pairs, 20);
        let going = g.types[0].value("GoingTo(location2)").unwrap();
        assert_eq!(going.successors.len(), 1);
        assert_eq!(going.successors[0].pattern.name, "At(location2)");
    }

    #[test]
    fn grounding_is_idempotent() {
        let once = ground(&nav_domain(&FIVE)).unwrap();
        assert_eq!(ground(&once).unwrap(), once);
    }

    #[test]
    fn oversized_numeric_domain_is_rejected() {
        let mut d = nav_domain(&FIVE);
        d.parameters.push(ParameterDomain { name: "file".into(), kind: ParamKind::Numeric { lb: 0, ub: 500 } });
        assert_eq!(ground(&d), Err(GroundError::TooLarge("file".into())));
    }

    #[test]
    fn shortest_paths_through_transition_graph() {
        let gd = GroundDomain::new(&nav_domain(&["a", "b"])).unwrap();
        let nav = gd.var_id("Navigation").unwrap();
        let at_a = gd.val_id(nav, "At(a)").unwrap();
        let at_b = gd.val_id(nav, "At(b)").unwrap();
        let going_b = gd.val_id(nav, "GoingTo(b)").unwrap();
        assert_eq!(gd.transition_paths(nav, at_a, at_b, 6), vec![vec![going_b]]);
        assert_eq!(gd.transition_paths(nav, at_a, at_b, 0), Vec::<Vec<ValId>>::new());
        // At(a) back to At(a) needs a round trip.
        let paths = gd.transition_paths(nav, at_a, at_a, 6);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].len(), 3);
    }
}
