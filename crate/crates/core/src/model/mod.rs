//! Domains, problems and goals: state variables, synchronization rules, facts, observations.

mod ground;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::relation::{PointKind, PrimitiveKind, Relation};
use crate::time::{Bound, TimeValue};

pub use ground::{
    ground, value_label, GroundDomain, GroundError, GroundRule, GroundStatement, GroundVar, GroundValue,
    GAtom, Slot, ValId, VarId, MAX_NUMERIC_VALUES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Planned,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Controllability {
    #[serde(rename = "c")]
    Controllable,
    #[serde(rename = "u")]
    Uncontrollable,
}

impl fmt::Display for Controllability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Controllability::Controllable => "c",
            Controllability::Uncontrollable => "u",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Enumeration(Vec<String>),
    Numeric { lb: i64, ub: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterDomain {
    pub name: String,
    pub kind: ParamKind,
}

impl ParameterDomain {
    /// Members as printed labels; numeric domains enumerate every integer.
    pub fn members(&self) -> Vec<Term> {
        match &self.kind {
            ParamKind::Enumeration(v) => v.iter().map(|s| Term::Sym(s.clone())).collect(),
            ParamKind::Numeric { lb, ub } => (*lb..=*ub).map(Term::Num).collect(),
        }
    }

    pub fn size(&self) -> u64 {
        match &self.kind {
            ParamKind::Enumeration(v) => v.len() as u64,
            ParamKind::Numeric { lb, ub } => (ub - lb + 1).max(0) as u64,
        }
    }

    pub fn admits(&self, t: &Term) -> bool {
        match (&self.kind, t) {
            (ParamKind::Enumeration(v), Term::Sym(s)) => v.contains(s),
            (ParamKind::Numeric { lb, ub }, Term::Num(n)) => lb <= n && n <= ub,
            _ => false,
        }
    }
}

/// A parameter variable (`?x`) or a literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Sym(String),
    Num(i64),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Sym(s) => f.write_str(s),
            Term::Num(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintOp {
    Equal,
    NotEqual,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterConstraint {
    pub op: ConstraintOp,
    pub left: Term,
    pub right: Term,
}

impl ParameterConstraint {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.left.var().into_iter().chain(self.right.var())
    }
}

/// `Name(arg, ...)` as written in transitions, rules, facts and goals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuePattern {
    pub name: String,
    pub args: Vec<Term>,
}

impl ValuePattern {
    pub fn plain(name: &str) -> ValuePattern {
        ValuePattern { name: name.to_string(), args: vec![] }
    }
}

impl fmt::Display for ValuePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor {
    pub pattern: ValuePattern,
    pub constraints: Vec<ParameterConstraint>,
}

/// A value of a state-variable type, with its duration, tag and transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueDecl {
    pub name: String,
    /// Parameter types from the type header.
    pub params: Vec<String>,
    /// Arguments on the `VALUE` line, usually `?vars`.
    pub args: Vec<Term>,
    pub duration: Bound,
    pub controllability: Controllability,
    pub successors: Vec<Successor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateVariableType {
    pub name: String,
    pub kind: VarKind,
    pub values: Vec<ValueDecl>,
}

impl StateVariableType {
    pub fn value(&self, name: &str) -> Option<&ValueDecl> {
        self.values.iter().find(|v| v.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub type_name: String,
}

/// Annotated token variable `name[component = value]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenVar {
    pub name: String,
    pub component: String,
    pub value: ValuePattern,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Trigger,
    Var(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Trigger => f.write_str("a0"),
            Operand::Var(v) => f.write_str(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    True,
    /// `right` is `None` for point-anchored relations.
    Rel { left: Operand, relation: Relation, right: Option<Operand> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExistentialStatement {
    pub vars: Vec<TokenVar>,
    pub atoms: Vec<Atom>,
    pub constraints: Vec<ParameterConstraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynchronizationRule {
    pub trigger: Option<TokenVar>,
    pub disjuncts: Vec<ExistentialStatement>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanningDomain {
    pub name: String,
    pub temporal_module: String,
    pub horizon: TimeValue,
    pub parameters: Vec<ParameterDomain>,
    pub types: Vec<StateVariableType>,
    pub components: Vec<Component>,
    pub rules: Vec<SynchronizationRule>,
}

/// A component paired with its type.
#[derive(Clone, Copy, Debug)]
pub struct StateVariable<'a> {
    pub name: &'a str,
    pub ty: &'a StateVariableType,
}

impl StateVariable<'_> {
    pub fn kind(&self) -> VarKind {
        self.ty.kind
    }
}

impl PlanningDomain {
    pub fn parameter(&self, name: &str) -> Option<&ParameterDomain> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn type_named(&self, name: &str) -> Option<&StateVariableType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<StateVariable<'_>> {
        let c = self.components.iter().find(|c| c.name == name)?;
        Some(StateVariable { name: &c.name, ty: self.type_named(&c.type_name)? })
    }

    pub fn variables(&self) -> impl Iterator<Item = StateVariable<'_>> {
        self.components
            .iter()
            .filter_map(|c| Some(StateVariable { name: &c.name, ty: self.type_named(&c.type_name)? }))
    }

    pub fn planned(&self) -> impl Iterator<Item = StateVariable<'_>> {
        self.variables().filter(|v| v.kind() == VarKind::Planned)
    }

    pub fn external(&self) -> impl Iterator<Item = StateVariable<'_>> {
        self.variables().filter(|v| v.kind() == VarKind::External)
    }
}

/// Problem for a domain element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

/// Well-formedness of a domain; empty iff every invariant holds.
pub fn validate_domain(d: &PlanningDomain) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |element: String, message: String| out.push(Diagnostic { element, message });

    if d.horizon.is_infinite() || d.horizon == TimeValue::ZERO {
        diag(d.temporal_module.clone(), "horizon must be finite and positive".into());
    }
    let mut seen = BTreeSet::new();
    for p in &d.parameters {
        if !seen.insert(p.name.as_str()) {
            diag(p.name.clone(), "duplicate parameter type".into());
        }
        match &p.kind {
            ParamKind::Enumeration(v) if v.is_empty() => diag(p.name.clone(), "empty enumeration".into()),
            ParamKind::Numeric { lb, ub } if lb > ub => diag(p.name.clone(), "numeric lower bound above upper bound".into()),
            _ => {}
        }
        if p.size() > MAX_NUMERIC_VALUES as u64 && matches!(p.kind, ParamKind::Numeric { .. }) {
            diag(p.name.clone(), format!("numeric domain exceeds {MAX_NUMERIC_VALUES} values"));
        }
    }
    let mut seen = BTreeSet::new();
    for t in &d.types {
        if !seen.insert(t.name.as_str()) {
            diag(t.name.clone(), "duplicate type".into());
        }
        let mut names = BTreeSet::new();
        for v in &t.values {
            let el = format!("{}.{}", t.name, v.name);
            if !names.insert(v.name.as_str()) {
                diag(el.clone(), "duplicate value".into());
            }
            for p in &v.params {
                if d.parameter(p).is_none() {
                    diag(el.clone(), format!("unknown parameter type {p}"));
                }
            }
            let mut arg_names = BTreeSet::new();
            if v.args.iter().any(|a| a.var().is_none_or(|x| !arg_names.insert(x))) {
                diag(el.clone(), "value arguments must be distinct ?variables".into());
            }
            if v.args.len() != v.params.len() {
                diag(el.clone(), format!("expects {} argument(s), got {}", v.params.len(), v.args.len()));
            }
            if v.duration.lb > v.duration.ub {
                diag(el.clone(), "duration lower bound above upper bound".into());
            }
            if t.kind == VarKind::External && v.controllability == Controllability::Controllable {
                diag(el.clone(), "values of external variables must be uncontrollable".into());
            }
            if v.controllability == Controllability::Uncontrollable
                && (v.duration.lb == TimeValue::ZERO || v.duration.ub.is_infinite())
            {
                diag(el.clone(), "uncontrollable values need dmin > 0 and finite dmax".into());
            }
            if v.successors.is_empty() {
                diag(el.clone(), "value has no successor".into());
            }
            for s in &v.successors {
                match t.value(&s.pattern.name) {
                    None => diag(el.clone(), format!("successor {} is not a value of {}", s.pattern.name, t.name)),
                    Some(sv) if sv.params.len() != s.pattern.args.len() => diag(
                        el.clone(),
                        format!("successor {} expects {} argument(s)", s.pattern.name, sv.params.len()),
                    ),
                    _ => {}
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    for c in &d.components {
        if !seen.insert(c.name.as_str()) {
            diag(c.name.clone(), "duplicate component".into());
        }
        if d.type_named(&c.type_name).is_none() {
            diag(c.name.clone(), format!("unknown type {}", c.type_name));
        }
    }
    for (i, r) in d.rules.iter().enumerate() {
        let el = match &r.trigger {
            Some(t) => format!("SYNCHRONIZE {}.{}", t.component, t.value.name),
            None => format!("rule #{i}"),
        };
        if r.disjuncts.is_empty() {
            diag(el.clone(), "rule has no disjunct".into());
        }
        if let Some(t) = &r.trigger {
            check_token_var(d, t, &el, &mut diag);
        }
        for s in &r.disjuncts {
            let mut names = BTreeSet::new();
            for v in &s.vars {
                if !names.insert(v.name.as_str()) {
                    diag(el.clone(), format!("duplicate token variable {}", v.name));
                }
                check_token_var(d, v, &el, &mut diag);
            }
            for a in &s.atoms {
                if let Atom::Rel { left, relation, right } = a {
                    if let Err(e) = relation.check() {
                        diag(el.clone(), e.to_string());
                    }
                    for op in std::iter::once(left).chain(right) {
                        match op {
                            Operand::Trigger if r.trigger.is_none() => {
                                diag(el.clone(), "goal rule refers to a trigger".into())
                            }
                            Operand::Var(v) if !names.contains(v.as_str()) => {
                                diag(el.clone(), format!("undeclared token variable {v}"))
                            }
                            _ => {}
                        }
                    }
                    if relation.kind.is_point() != right.is_none() {
                        diag(el.clone(), format!("{} has the wrong operand form", relation.kind.keyword()));
                    }
                }
            }
        }
    }
    out
}

fn check_token_var(d: &PlanningDomain, t: &TokenVar, el: &str, diag: &mut impl FnMut(String, String)) {
    match d.variable(&t.component) {
        None => diag(el.to_string(), format!("unknown component {}", t.component)),
        Some(sv) => match sv.ty.value(&t.value.name) {
            None => diag(el.to_string(), format!("{} has no value {}", t.component, t.value.name)),
            Some(v) if v.params.len() != t.value.args.len() => diag(
                el.to_string(),
                format!("{}.{} expects {} argument(s)", t.component, v.name, v.params.len()),
            ),
            _ => {}
        },
    }
}

/// Start, end and duration windows of a fact or goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub start: Bound,
    pub end: Bound,
    pub duration: Bound,
}

impl Window {
    pub fn unbounded() -> Window {
        Window { start: Bound::unbounded(), end: Bound::unbounded(), duration: Bound::unbounded() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Accomplishment {
    pub name: String,
    pub component: String,
    pub value: ValuePattern,
    pub window: Option<Window>,
}

/// Γ plus Δ; an empty `relational` list means Δ = ⊤.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Goal {
    pub accomplishments: Vec<Accomplishment>,
    pub relational: Vec<Vec<Atom>>,
}

/// Point atoms for the finite parts of a window on `op`.
pub fn window_atoms(op: &Operand, w: &Window) -> Vec<Atom> {
    let mut out = Vec::new();
    let mut point = |kind: PointKind, b: Bound| {
        if let Some(hi) = b.ub.get() {
            let rel = Relation::point(kind, Bound::closed(0, hi - b.lb.ticks()), hi);
            out.push(Atom::Rel { left: op.clone(), relation: rel, right: None });
        }
    };
    point(PointKind::StartsBefore, w.start);
    point(PointKind::EndsBefore, w.end);
    if w.duration != Bound::unbounded() {
        out.push(Atom::Rel {
            left: op.clone(),
            relation: Relation::primitive(PrimitiveKind::StartBeforeEnd, w.duration),
            right: Some(op.clone()),
        });
    }
    out
}

/// Empty-trigger rule with one disjunct per disjunct of Δ, each binding all of Γ.
pub fn goal_to_rule(g: &Goal) -> SynchronizationRule {
    let vars: Vec<TokenVar> = g
        .accomplishments
        .iter()
        .map(|a| TokenVar { name: a.name.clone(), component: a.component.clone(), value: a.value.clone() })
        .collect();
    let window: Vec<Atom> = g
        .accomplishments
        .iter()
        .filter_map(|a| a.window.as_ref().map(|w| window_atoms(&Operand::Var(a.name.clone()), w)))
        .flatten()
        .collect();
    let relational = if g.relational.is_empty() { vec![vec![]] } else { g.relational.clone() };
    let disjuncts = relational
        .into_iter()
        .map(|conj| {
            let mut atoms: Vec<Atom> = conj.into_iter().filter(|a| *a != Atom::True).collect();
            atoms.extend(window.iter().cloned());
            if atoms.is_empty() {
                atoms.push(Atom::True);
            }
            ExistentialStatement { vars: vars.clone(), atoms, constraints: vec![] }
        })
        .collect();
    SynchronizationRule { trigger: None, disjuncts }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fact {
    pub name: String,
    pub component: String,
    pub value: ValuePattern,
    pub window: Window,
    /// Observed history from a previous execution; exempt from duration bounds.
    pub executed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedToken {
    pub name: String,
    pub value: ValuePattern,
    pub start: Bound,
    pub end: Bound,
    pub duration: Bound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationTimeline {
    pub component: String,
    pub tokens: Vec<ObservedToken>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanningProblem {
    pub name: String,
    pub domain: PlanningDomain,
    pub horizon: TimeValue,
    pub facts: Vec<Fact>,
    pub goal: Goal,
    pub observations: Vec<ObservationTimeline>,
}

impl PlanningProblem {
    pub fn observation(&self, component: &str) -> Option<&ObservationTimeline> {
        self.observations.iter().find(|o| o.component == component)
    }
}
