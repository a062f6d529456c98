use std::collections::BTreeMap;

use super::lexer::Tok;
use super::{Cursor, LoadError, LoadErrorKind, PResult, ParseDiagnostic, Span};
use crate::model::{
    self, Atom, Component, Controllability, ExistentialStatement, Operand, ParamKind, ParameterDomain,
    PlanningDomain, StateVariableType, Successor, SynchronizationRule, TokenVar, ValueDecl, VarKind,
};
use crate::time::TimeValue;

/// Spans of named elements, for locating semantic diagnostics.
type Spans = BTreeMap<String, Span>;

pub fn parse_ddl(text: &str) -> Result<PlanningDomain, LoadError> {
    let mut c = Cursor::new(text);
    let mut spans = Spans::new();
    let parsed = domain(&mut c, &mut spans);
    if let Some(e) = c.syntax_errors() {
        return Err(e);
    }
    let (d, head) = parsed.map_err(|_| LoadError { kind: LoadErrorKind::Syntax, diagnostics: c.diags.clone() })?;
    let mut diags: Vec<ParseDiagnostic> = model::validate_domain(&d)
        .into_iter()
        .map(|dg| {
            let span = spans.get(&dg.element).copied().unwrap_or(head);
            ParseDiagnostic::error(dg.to_string(), span)
        })
        .collect();
    if diags.is_empty() {
        if let Err(e) = model::ground(&d) {
            diags.push(ParseDiagnostic::error(e.to_string(), head));
        }
    }
    if diags.is_empty() {
        Ok(d)
    } else {
        Err(LoadError { kind: LoadErrorKind::Semantic, diagnostics: diags })
    }
}

fn domain(c: &mut Cursor, spans: &mut Spans) -> PResult<(PlanningDomain, Span)> {
    c.expect_kw("DOMAIN")?;
    let (name, head) = c.ident()?;
    let mut d = PlanningDomain {
        name,
        temporal_module: String::new(),
        horizon: TimeValue::ZERO,
        parameters: vec![],
        types: vec![],
        components: vec![],
        rules: vec![],
    };
    let mut seen_tm = false;
    c.block_items(|c| {
        if c.eat_kw("TEMPORAL_MODULE") {
            let (tm, span) = c.ident()?;
            c.expect(Tok::Eq)?;
            let b = c.bound()?;
            // Some listings append a resolution: `[0, 100], 100;`.
            if c.eat(&Tok::Comma) {
                c.int()?;
            }
            c.expect(Tok::Semi)?;
            if seen_tm {
                return c.error("duplicate TEMPORAL_MODULE", span);
            }
            if b.lb != TimeValue::ZERO {
                return c.error("temporal module must start at 0", span);
            }
            seen_tm = true;
            spans.insert(tm.clone(), span);
            d.temporal_module = tm;
            d.horizon = b.ub;
        } else if c.eat_kw("PAR_TYPE") {
            d.parameters.push(parameter(c, spans)?);
        } else if c.eat_kw("COMP_TYPE") {
            d.types.push(comp_type(c, spans)?);
        } else if c.eat_kw("COMPONENT") {
            let (name, span) = c.ident()?;
            // Optional `{FlexibleTimeline}` annotation of older listings.
            if c.eat(&Tok::LBrace) {
                c.ident()?;
                c.expect(Tok::RBrace)?;
            }
            c.expect(Tok::Colon)?;
            let (type_name, _) = c.ident()?;
            c.expect(Tok::Semi)?;
            spans.entry(name.clone()).or_insert(span);
            d.components.push(Component { name, type_name });
        } else if c.eat_kw("SYNCHRONIZE") {
            d.rules.extend(synchronize(c, spans)?);
        } else {
            return c.unexpected("a domain item");
        }
        Ok(())
    })?;
    if !c.at(&Tok::Eof) {
        return c.unexpected("end of input");
    }
    if !seen_tm {
        return c.error("missing TEMPORAL_MODULE", head);
    }
    Ok((d, head))
}

fn parameter(c: &mut Cursor, spans: &mut Spans) -> PResult<ParameterDomain> {
    let numeric = if c.eat_kw("EnumerationParameter") {
        false
    } else if c.eat_kw("NumericParameter") {
        true
    } else {
        return c.unexpected("`EnumerationParameter` or `NumericParameter`");
    };
    let (name, span) = c.ident()?;
    spans.entry(name.clone()).or_insert(span);
    c.expect(Tok::Eq)?;
    let kind = if numeric {
        c.expect(Tok::LBracket)?;
        let lb = c.int()?;
        c.expect(Tok::Comma)?;
        let ub = c.int()?;
        c.expect(Tok::RBracket)?;
        c.expect(Tok::Semi)?;
        ParamKind::Numeric { lb, ub }
    } else {
        c.expect(Tok::LBrace)?;
        let mut members = Vec::new();
        if !c.at(&Tok::RBrace) {
            loop {
                members.push(c.ident()?.0);
                if !c.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        c.expect(Tok::RBrace)?;
        c.eat(&Tok::Semi);
        ParamKind::Enumeration(members)
    };
    Ok(ParameterDomain { name, kind })
}

fn comp_type(c: &mut Cursor, spans: &mut Spans) -> PResult<StateVariableType> {
    c.expect_kw("StateVariable")?;
    let kind = if c.eat_kw("external") { VarKind::External } else { VarKind::Planned };
    let (name, span) = c.ident()?;
    spans.entry(name.clone()).or_insert(span);
    c.expect(Tok::LParen)?;
    let mut header: Vec<(String, Vec<String>, Span)> = Vec::new();
    loop {
        let (v, vspan) = c.ident()?;
        c.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !c.at(&Tok::RParen) {
            loop {
                params.push(c.ident()?.0);
                if !c.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        c.expect(Tok::RParen)?;
        header.push((v, params, vspan));
        if !c.eat(&Tok::Comma) {
            break;
        }
    }
    c.expect(Tok::RParen)?;
    let mut values: Vec<ValueDecl> = Vec::new();
    c.block_items(|c| {
        c.expect_kw("VALUE")?;
        // Values of external variables are uncontrollable with or without the tag.
        let controllability = if c.eat_kw("uncontrollable") || kind == VarKind::External {
            Controllability::Uncontrollable
        } else {
            Controllability::Controllable
        };
        let (pat, vspan) = c.pattern()?;
        let duration = c.bound()?;
        c.expect_kw("MEETS")?;
        let mut successors: Vec<Successor> = Vec::new();
        c.block_items(|c| {
            if c.at_constraint() {
                let span = c.span();
                let k = c.constraint()?;
                match successors.last_mut() {
                    Some(s) => s.constraints.push(k),
                    None => return c.error("parameter constraint before any successor", span),
                }
            } else {
                let (pattern, _) = c.pattern()?;
                c.expect(Tok::Semi)?;
                successors.push(Successor { pattern, constraints: vec![] });
            }
            Ok(())
        })?;
        let Some((_, params, _)) = header.iter().find(|(n, _, _)| *n == pat.name) else {
            return c.error(format!("value {} is not declared in the header of {name}", pat.name), vspan);
        };
        spans.entry(format!("{name}.{}", pat.name)).or_insert(vspan);
        values.push(ValueDecl {
            name: pat.name,
            params: params.clone(),
            args: pat.args,
            duration,
            controllability,
            successors,
        });
        Ok(())
    })?;
    for (v, _, vspan) in &header {
        if !values.iter().any(|d| d.name == *v) {
            c.diags.push(ParseDiagnostic::error(format!("value {v} has no VALUE declaration"), *vspan));
        }
    }
    Ok(StateVariableType { name, kind, values })
}

fn synchronize(c: &mut Cursor, spans: &mut Spans) -> PResult<Vec<SynchronizationRule>> {
    let (component, span) = c.ident()?;
    // Optional `.timelines` suffix of older listings.
    if c.eat(&Tok::Dot) {
        c.ident()?;
    }
    let mut rules = Vec::new();
    c.block_items(|c| {
        c.expect_kw("VALUE")?;
        let (value, vspan) = c.pattern()?;
        spans.entry(format!("SYNCHRONIZE {component}.{}", value.name)).or_insert(vspan);
        let mut disjuncts = vec![statement(c, true)?];
        while c.eat_kw("OR") {
            disjuncts.push(statement(c, true)?);
        }
        let trigger = TokenVar { name: "a0".into(), component: component.clone(), value };
        rules.push(SynchronizationRule { trigger: Some(trigger), disjuncts });
        Ok(())
    })?;
    spans.entry(format!("SYNCHRONIZE {component}")).or_insert(span);
    Ok(rules)
}

/// `{ decl | relation | constraint ... }`; `with_trigger` makes an omitted left operand the trigger.
pub(super) fn statement(c: &mut Cursor, with_trigger: bool) -> PResult<ExistentialStatement> {
    let mut s = ExistentialStatement { vars: vec![], atoms: vec![], constraints: vec![] };
    c.block_items(|c| {
        if c.at_relation() {
            let (left, relation, right, span) = c.relation()?;
            // Inside a rule body `a0` names the trigger.
            let operand = |v: String| if with_trigger && v == "a0" { Operand::Trigger } else { Operand::Var(v) };
            let left = match left {
                Some(v) => operand(v),
                None if with_trigger => Operand::Trigger,
                None => return c.error("relation needs a left operand", span),
            };
            s.atoms.push(Atom::Rel { left, relation, right: right.map(operand) });
        } else if c.at_constraint() {
            s.constraints.push(c.constraint()?);
        } else {
            let (name, _) = c.ident()?;
            let (component, _) = c.ident()?;
            c.expect(Tok::Dot)?;
            let (value, _) = c.pattern()?;
            c.expect(Tok::Semi)?;
            s.vars.push(TokenVar { name, component, value });
        }
        Ok(())
    })?;
    if s.atoms.is_empty() {
        s.atoms.push(Atom::True);
    }
    Ok(s)
}
