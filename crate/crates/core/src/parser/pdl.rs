use std::collections::BTreeMap;

use super::ddl::statement;
use super::lexer::Tok;
use super::{Cursor, LoadError, LoadErrorKind, PResult, ParseDiagnostic, Span};
use crate::model::{
    Accomplishment, Atom, ConstraintOp, Fact, Goal, GroundDomain, ObservationTimeline, ObservedToken, Operand,
    PlanningDomain, PlanningProblem, Term, ValuePattern, VarKind, Window,
};
use crate::stn::{TemporalNetwork, ORIGIN};
use crate::time::Bound;

enum Item {
    Fact { name: String, component: String, value: ValuePattern, window: Window, executed: bool, span: Span },
    Goal { name: String, component: String, value: ValuePattern, window: Option<Window>, span: Span },
}

struct Raw {
    name: String,
    domain: String,
    domain_span: Span,
    items: Vec<Item>,
    bindings: BTreeMap<String, Term>,
    atoms: Vec<(Atom, Span)>,
    blocks: Vec<Vec<(Atom, Span)>>,
}

pub fn parse_pdl(text: &str, domain: &PlanningDomain) -> Result<PlanningProblem, LoadError> {
    let mut c = Cursor::new(text);
    let raw = problem(&mut c);
    if let Some(e) = c.syntax_errors() {
        return Err(e);
    }
    let raw = raw.map_err(|_| LoadError { kind: LoadErrorKind::Syntax, diagnostics: c.diags.clone() })?;
    let mut diags = Vec::new();
    let p = build(raw, domain, &mut diags);
    if diags.is_empty() {
        Ok(p)
    } else {
        Err(LoadError { kind: LoadErrorKind::Semantic, diagnostics: diags })
    }
}

fn window(c: &mut Cursor) -> PResult<Window> {
    Ok(Window { start: c.bound()?, end: c.bound()?, duration: c.bound()? })
}

fn problem(c: &mut Cursor) -> PResult<Raw> {
    c.expect_kw("PROBLEM")?;
    let (name, _) = c.ident()?;
    c.expect(Tok::LParen)?;
    c.expect_kw("DOMAIN")?;
    let (domain, domain_span) = c.ident()?;
    c.expect(Tok::RParen)?;
    let mut raw = Raw {
        name,
        domain,
        domain_span,
        items: vec![],
        bindings: BTreeMap::new(),
        atoms: vec![],
        blocks: vec![],
    };
    c.block_items(|c| {
        if c.at(&Tok::LBrace) {
            let mut blocks = vec![relational_block(c)?];
            while c.eat_kw("OR") {
                blocks.push(relational_block(c)?);
            }
            if !raw.blocks.is_empty() {
                return c.error("only one disjunctive goal block is allowed", c.span());
            }
            raw.blocks = blocks;
        } else if c.at_relation() {
            let (left, relation, right, span) = c.relation()?;
            let Some(left) = left else {
                return c.error("relation needs a left operand", span);
            };
            raw.atoms.push((Atom::Rel { left: Operand::Var(left), relation, right: right.map(Operand::Var) }, span));
        } else if c.at_constraint() {
            let span = c.span();
            let k = c.constraint()?;
            match (k.op, k.left, k.right) {
                (ConstraintOp::Equal, Term::Var(v), lit) if lit.var().is_none() => {
                    raw.bindings.insert(v, lit);
                }
                _ => return c.error("problem bindings take the form `?var = literal;`", span),
            }
        } else {
            let (name, span) = c.ident()?;
            let is_goal = if c.eat_kw("goal") {
                true
            } else if c.eat_kw("fact") {
                false
            } else {
                return c.unexpected("`fact` or `goal`");
            };
            let executed = !is_goal && c.eat_kw("executed");
            let (component, _) = c.ident()?;
            c.expect(Tok::Dot)?;
            let (value, _) = c.pattern()?;
            let w = if c.eat_kw("AT") { Some(window(c)?) } else { None };
            c.expect(Tok::Semi)?;
            raw.items.push(if is_goal {
                Item::Goal { name, component, value, window: w, span }
            } else {
                Item::Fact { name, component, value, window: w.unwrap_or_else(Window::unbounded), executed, span }
            });
        }
        Ok(())
    })?;
    if !c.at(&Tok::Eof) {
        return c.unexpected("end of input");
    }
    Ok(raw)
}

fn relational_block(c: &mut Cursor) -> PResult<Vec<(Atom, Span)>> {
    let span = c.span();
    let s = statement(c, false)?;
    if !s.vars.is_empty() || !s.constraints.is_empty() {
        return c.error("goal blocks may only contain relations", span);
    }
    Ok(s.atoms.into_iter().filter(|a| *a != Atom::True).map(|a| (a, span)).collect())
}

fn bind(p: &ValuePattern, b: &BTreeMap<String, Term>) -> ValuePattern {
    let args = p
        .args
        .iter()
        .map(|a| match a {
            Term::Var(v) => b.get(v).cloned().unwrap_or_else(|| a.clone()),
            lit => lit.clone(),
        })
        .collect();
    ValuePattern { name: p.name.clone(), args }
}

fn build(raw: Raw, d: &PlanningDomain, diags: &mut Vec<ParseDiagnostic>) -> PlanningProblem {
    let mut err = |m: String, s: Span| diags.push(ParseDiagnostic::error(m, s));
    if raw.domain != d.name {
        err(format!("problem refers to domain {}, loaded domain is {}", raw.domain, d.name), raw.domain_span);
    }
    let gd = GroundDomain::new(d).ok();
    let mut facts = Vec::new();
    let mut goal = Goal::default();
    let mut observations: Vec<ObservationTimeline> = Vec::new();
    let mut obs_spans: BTreeMap<String, Span> = BTreeMap::new();
    let mut names: BTreeMap<String, Span> = BTreeMap::new();
    for item in raw.items {
        let (name, component, value, span) = match &item {
            Item::Fact { name, component, value, span, .. } | Item::Goal { name, component, value, span, .. } => {
                (name.clone(), component.clone(), bind(value, &raw.bindings), *span)
            }
        };
        if names.insert(name.clone(), span).is_some() {
            err(format!("duplicate name {name}"), span);
        }
        let Some(sv) = d.variable(&component) else {
            err(format!("unknown component {component}"), span);
            continue;
        };
        let Some(decl) = sv.ty.value(&value.name) else {
            err(format!("{component} has no value {}", value.name), span);
            continue;
        };
        if decl.params.len() != value.args.len() {
            err(format!("{component}.{} expects {} argument(s)", value.name, decl.params.len()), span);
            continue;
        }
        for (a, pname) in value.args.iter().zip(&decl.params) {
            match (a, d.parameter(pname)) {
                (Term::Var(_), _) => {}
                (lit, Some(pd)) if !pd.admits(lit) => err(format!("{lit} is not a member of {pname}"), span),
                _ => {}
            }
        }
        let unbound: Vec<String> = value.args.iter().filter_map(|a| a.var().map(|v| format!("?{v}"))).collect();
        match item {
            Item::Goal { window, .. } => {
                if sv.kind() == VarKind::External {
                    err(format!("goal {name} is on external component {component}"), span);
                }
                goal.accomplishments.push(Accomplishment { name, component, value, window });
            }
            Item::Fact { window, executed, .. } => {
                if !unbound.is_empty() {
                    err(format!("fact {name} leaves {} unbound", unbound.join(", ")), span);
                }
                if sv.kind() == VarKind::External {
                    if executed {
                        err(format!("observation {name} cannot be marked executed"), span);
                    }
                    let tok = ObservedToken {
                        name,
                        value,
                        start: window.start,
                        end: window.end,
                        duration: window.duration,
                    };
                    obs_spans.entry(component.clone()).or_insert(span);
                    match observations.iter_mut().find(|o| o.component == component) {
                        Some(o) => o.tokens.push(tok),
                        None => observations.push(ObservationTimeline { component, tokens: vec![tok] }),
                    }
                } else {
                    facts.push(Fact { name, component, value, window, executed });
                }
            }
        }
    }
    let check_atom = |a: &Atom, s: Span, err: &mut dyn FnMut(String, Span)| {
        if let Atom::Rel { left, right, .. } = a {
            for op in std::iter::once(left).chain(right) {
                if let Operand::Var(v) = op {
                    if !goal.accomplishments.iter().any(|g| g.name == *v) {
                        err(format!("{v} is not a goal"), s);
                    }
                }
            }
        }
    };
    for (a, s) in raw.atoms.iter().chain(raw.blocks.iter().flatten()) {
        check_atom(a, *s, &mut err);
    }
    let top: Vec<Atom> = raw.atoms.into_iter().map(|(a, _)| a).collect();
    goal.relational = if raw.blocks.is_empty() {
        if top.is_empty() {
            vec![]
        } else {
            vec![top]
        }
    } else {
        raw.blocks
            .into_iter()
            .map(|b| top.iter().cloned().chain(b.into_iter().map(|(a, _)| a)).collect())
            .collect()
    };

    let horizon = d.horizon;
    for sv in d.external() {
        let Some(o) = observations.iter().find(|o| o.component == sv.name) else {
            err(format!("no observation timeline for external component {}", sv.name), raw.domain_span);
            continue;
        };
        let span = obs_spans[sv.name];
        let mut prev_end = Bound::point(0);
        for (i, t) in o.tokens.iter().enumerate() {
            if t.start != prev_end {
                err(format!("observation {} must start within {prev_end}", t.name), span);
            }
            prev_end = t.end;
            if let (Some(gd), true) = (&gd, i > 0) {
                let var = gd.var_id(sv.name).expect("component exists");
                let from = gd.resolve(sv.name, &o.tokens[i - 1].value);
                let to = gd.resolve(sv.name, &t.value);
                if let (Ok((_, a)), Ok((_, b))) = (from, to) {
                    if !gd.has_transition(var, a, b) {
                        err(format!("observation {} cannot follow {}", t.name, o.tokens[i - 1].name), span);
                    }
                }
            }
        }
        if prev_end.ub < horizon {
            err(format!("observation timeline of {} ends before the horizon {horizon}", sv.name), span);
        }
        if !observation_consistent(o) {
            err(format!("observation timeline of {} is temporally inconsistent", sv.name), span);
        }
    }
    PlanningProblem { name: raw.name, domain: d.clone(), horizon, facts, goal, observations }
}

fn observation_consistent(o: &ObservationTimeline) -> bool {
    let mut net = TemporalNetwork::new();
    let mut prev = ORIGIN;
    for t in &o.tokens {
        let end = net.add_time_point();
        let ok = net.add_requirement(ORIGIN, prev, t.start).is_ok()
            && net.add_requirement(ORIGIN, end, t.end).is_ok()
            && net.add_requirement(prev, end, t.duration).is_ok();
        if !ok {
            return false;
        }
        prev = end;
    }
    net.propagate()
}
