use std::fmt::Write;

use crate::model::{
    Atom, ConstraintOp, Controllability, ExistentialStatement, Operand, ParamKind, ParameterConstraint, PlanningDomain,
    PlanningProblem, ValuePattern, VarKind, Window,
};
use crate::relation::Relation;

fn pattern(p: &ValuePattern) -> String {
    p.to_string()
}

fn constraint(k: &ParameterConstraint) -> String {
    let op = match k.op {
        ConstraintOp::Equal => "=",
        ConstraintOp::NotEqual => "!=",
    };
    format!("{} {op} {};", k.left, k.right)
}

fn relation(left: Option<&str>, r: &Relation, right: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(l) = left {
        s.push_str(l);
        s.push(' ');
    }
    s.push_str(r.kind.keyword());
    for b in &r.bounds {
        write!(s, " {b}").unwrap();
    }
    if let Some(a) = r.anchor {
        write!(s, " {a}").unwrap();
    }
    if let Some(rt) = right {
        write!(s, " {rt}").unwrap();
    }
    s.push(';');
    s
}

fn atom(a: &Atom, trigger_implicit: bool) -> Option<String> {
    let Atom::Rel { left, relation: r, right } = a else { return None };
    let name = |o: &Operand| o.to_string();
    let left = match left {
        Operand::Trigger if trigger_implicit => None,
        o => Some(name(o)),
    };
    Some(relation(left.as_deref(), r, right.as_ref().map(name).as_deref()))
}

fn statement(out: &mut String, s: &ExistentialStatement, indent: &str) {
    writeln!(out, "{indent}{{").unwrap();
    for v in &s.vars {
        writeln!(out, "{indent}  {} {}.{};", v.name, v.component, pattern(&v.value)).unwrap();
    }
    for a in s.atoms.iter().filter_map(|a| atom(a, true)) {
        writeln!(out, "{indent}  {a}").unwrap();
    }
    for k in &s.constraints {
        writeln!(out, "{indent}  {}", constraint(k)).unwrap();
    }
    writeln!(out, "{indent}}}").unwrap();
}

/// Canonical DDL text; declaration order is preserved.
pub fn print_domain(d: &PlanningDomain) -> String {
    let mut out = String::new();
    writeln!(out, "DOMAIN {}\n{{", d.name).unwrap();
    writeln!(out, "  TEMPORAL_MODULE {} = [0, {}];", d.temporal_module, d.horizon).unwrap();
    if !d.parameters.is_empty() {
        out.push('\n');
    }
    for p in &d.parameters {
        match &p.kind {
            ParamKind::Enumeration(m) => {
                writeln!(out, "  PAR_TYPE EnumerationParameter {} = {{ {} }};", p.name, m.join(", ")).unwrap()
            }
            ParamKind::Numeric { lb, ub } => {
                writeln!(out, "  PAR_TYPE NumericParameter {} = [{lb}, {ub}];", p.name).unwrap()
            }
        }
    }
    for t in &d.types {
        let ext = if t.kind == VarKind::External { "external " } else { "" };
        let header: Vec<String> = t.values.iter().map(|v| format!("{}({})", v.name, v.params.join(", "))).collect();
        writeln!(out, "\n  COMP_TYPE StateVariable {ext}{} ({})\n  {{", t.name, header.join(", ")).unwrap();
        for (i, v) in t.values.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let unc = match (t.kind, v.controllability) {
                (VarKind::Planned, Controllability::Uncontrollable) => "uncontrollable ",
                _ => "",
            };
            let head = ValuePattern { name: v.name.clone(), args: v.args.clone() };
            writeln!(out, "    VALUE {unc}{} {}\n    MEETS {{", pattern(&head), v.duration).unwrap();
            for s in &v.successors {
                writeln!(out, "      {};", pattern(&s.pattern)).unwrap();
                for k in &s.constraints {
                    writeln!(out, "      {}", constraint(k)).unwrap();
                }
            }
            writeln!(out, "    }}").unwrap();
        }
        writeln!(out, "  }}").unwrap();
    }
    if !d.components.is_empty() {
        out.push('\n');
    }
    for c in &d.components {
        writeln!(out, "  COMPONENT {} : {};", c.name, c.type_name).unwrap();
    }
    // One block per run of rules on the same component keeps rule order stable.
    let mut i = 0;
    let rules: Vec<_> = d.rules.iter().filter(|r| r.trigger.is_some()).collect();
    while i < rules.len() {
        let comp = &rules[i].trigger.as_ref().unwrap().component;
        writeln!(out, "\n  SYNCHRONIZE {comp}\n  {{").unwrap();
        let mut first = true;
        while i < rules.len() && rules[i].trigger.as_ref().unwrap().component == *comp {
            if !first {
                out.push('\n');
            }
            first = false;
            let r = rules[i];
            writeln!(out, "    VALUE {}", pattern(&r.trigger.as_ref().unwrap().value)).unwrap();
            for (k, s) in r.disjuncts.iter().enumerate() {
                if k > 0 {
                    writeln!(out, "    OR").unwrap();
                }
                statement(&mut out, s, "    ");
            }
            i += 1;
        }
        writeln!(out, "  }}").unwrap();
    }
    out.push_str("}\n");
    out
}

fn window(w: &Window) -> String {
    format!("AT {} {} {}", w.start, w.end, w.duration)
}

/// Canonical PDL text with bindings already applied to facts and goals.
pub fn print_problem(p: &PlanningProblem) -> String {
    let mut out = String::new();
    writeln!(out, "PROBLEM {} (DOMAIN {})\n{{", p.name, p.domain.name).unwrap();
    for f in &p.facts {
        let ex = if f.executed { "executed " } else { "" };
        writeln!(out, "  {} fact {ex}{}.{} {};", f.name, f.component, pattern(&f.value), window(&f.window)).unwrap();
    }
    for o in &p.observations {
        for t in &o.tokens {
            let w = Window { start: t.start, end: t.end, duration: t.duration };
            writeln!(out, "  {} fact {}.{} {};", t.name, o.component, pattern(&t.value), window(&w)).unwrap();
        }
    }
    for g in &p.goal.accomplishments {
        let w = g.window.as_ref().map(|w| format!(" {}", window(w))).unwrap_or_default();
        writeln!(out, "  {} goal {}.{}{w};", g.name, g.component, pattern(&g.value)).unwrap();
    }
    match p.goal.relational.as_slice() {
        [] => {}
        [only] => {
            for a in only.iter().filter_map(|a| atom(a, false)) {
                writeln!(out, "  {a}").unwrap();
            }
        }
        many => {
            for (k, conj) in many.iter().enumerate() {
                if k > 0 {
                    writeln!(out, "  OR").unwrap();
                }
                writeln!(out, "  {{").unwrap();
                for a in conj.iter().filter_map(|a| atom(a, false)) {
                    writeln!(out, "    {a}").unwrap();
                }
                writeln!(out, "  }}").unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}
