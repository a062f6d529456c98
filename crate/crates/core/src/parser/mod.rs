//! DDL and PDL readers with source-located diagnostics, plus a canonical printer.

mod ddl;
mod lexer;
mod pdl;
mod print;

use std::fmt;

use thiserror::Error;

use crate::model::{ConstraintOp, ParameterConstraint, Term, ValuePattern};
use crate::relation::{Relation, RelationKind};
use crate::time::{Bound, TimeValue};
use lexer::{Tok, Token};

pub use ddl::parse_ddl;
pub use pdl::parse_pdl;
pub use print::{print_domain, print_problem};

/// 1-based position of a token in its source.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
    pub file: Option<String>,
}

impl ParseDiagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> ParseDiagnostic {
        ParseDiagnostic { severity: Severity::Error, message: message.into(), span, file: None }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}:{}: {sev}: {}", self.span.line, self.span.column, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadErrorKind {
    /// Lexical or grammatical problems.
    Syntax,
    /// Well-formed text describing an invalid model.
    Semantic,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{} error(s) in {kind:?} check", diagnostics.len())]
pub struct LoadError {
    pub kind: LoadErrorKind,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl LoadError {
    pub fn with_file(mut self, file: &str) -> LoadError {
        for d in &mut self.diagnostics {
            d.file = Some(file.to_string());
        }
        self
    }
}

/// Failure whose diagnostic has already been recorded.
struct Reported;

type PResult<T> = Result<T, Reported>;

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
}

impl Cursor {
    fn new(text: &str) -> Cursor {
        let (toks, diags) = lexer::lex(text);
        Cursor { toks, pos: 0, diags }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&mut self, message: impl Into<String>, span: Span) -> PResult<T> {
        self.diags.push(ParseDiagnostic::error(message, span));
        Err(Reported)
    }

    fn unexpected<T>(&mut self, wanted: &str) -> PResult<T> {
        let msg = format!("expected {wanted}, found {}", self.peek().describe());
        let span = self.span();
        self.error(msg, span)
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        let hit = self.at(t);
        if hit {
            self.bump();
        }
        hit
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if self.at(&t) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&t.describe())
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => self.unexpected("an identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.unexpected("an integer"),
        }
    }

    fn time(&mut self) -> PResult<TimeValue> {
        let span = self.span();
        if self.eat(&Tok::Inf) {
            return Ok(TimeValue::INFINITY);
        }
        let v = self.int()?;
        if v < 0 || v as u64 > TimeValue::MAX_FINITE {
            return self.error(format!("time value {v} out of range"), span);
        }
        Ok(TimeValue::finite(v as u64))
    }

    /// `[lb, ub]`.
    fn bound(&mut self) -> PResult<Bound> {
        let span = self.expect(Tok::LBracket)?;
        let lb = self.time()?;
        self.expect(Tok::Comma)?;
        let ub = self.time()?;
        self.expect(Tok::RBracket)?;
        match Bound::new(lb, ub) {
            Ok(b) => Ok(b),
            Err(e) => self.error(e.to_string(), span),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Term::Sym(s))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Num(n))
            }
            _ => self.unexpected("a ?variable or literal"),
        }
    }

    /// `Name(term, ...)`.
    fn pattern(&mut self) -> PResult<(ValuePattern, Span)> {
        let (name, span) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                args.push(self.term()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok((ValuePattern { name, args }, span))
    }

    fn at_constraint(&self) -> bool {
        matches!(self.peek(), Tok::Var(_)) || matches!(self.peek_at(1), Tok::Eq | Tok::Neq)
    }

    /// `term (= | !=) term ;`
    fn constraint(&mut self) -> PResult<ParameterConstraint> {
        let left = self.term()?;
        let op = if self.eat(&Tok::Eq) {
            ConstraintOp::Equal
        } else if self.eat(&Tok::Neq) {
            ConstraintOp::NotEqual
        } else {
            return self.unexpected("`=` or `!=`");
        };
        let right = self.term()?;
        self.expect(Tok::Semi)?;
        Ok(ParameterConstraint { op, left, right })
    }

    fn at_relation(&self) -> bool {
        let kw = |t: &Tok| matches!(t, Tok::Ident(s) if RelationKind::from_keyword(s).is_some());
        kw(self.peek()) || (matches!(self.peek(), Tok::Ident(_)) && kw(self.peek_at(1)))
    }

    /// `[left] KEYWORD bound* [right | anchor] ;` with `None` for an omitted left operand.
    fn relation(&mut self) -> PResult<(Option<String>, Relation, Option<String>, Span)> {
        let span = self.span();
        let left = match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(a), Tok::Ident(b))
                if RelationKind::from_keyword(b).is_some() && RelationKind::from_keyword(a).is_none() =>
            {
                Some(self.ident()?.0)
            }
            (Tok::Ident(a), Tok::Ident(_)) if RelationKind::from_keyword(a).is_some() => None,
            (Tok::Ident(_), Tok::Ident(_)) => Some(self.ident()?.0),
            _ => None,
        };
        let (word, kspan) = self.ident()?;
        let Some(kind) = RelationKind::from_keyword(&word) else {
            return self.error(format!("unknown relation `{word}`"), kspan);
        };
        let mut bounds = Vec::new();
        while self.at(&Tok::LBracket) {
            bounds.push(self.bound()?);
        }
        let (right, anchor) = match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                (Some(s), None)
            }
            Tok::Int(_) => (None, Some(self.time()?)),
            _ => (None, None),
        };
        self.expect(Tok::Semi)?;
        match Relation::new(kind, bounds, anchor) {
            Ok(r) => Ok((left, r, right, span)),
            Err(e) => self.error(e.to_string(), kspan),
        }
    }

    /// Skip to just past the next `;` at this nesting level, or up to a closing `}`.
    fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::RBrace if depth == 0 => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return;
                    }
                }
                _ => {}
            }
            self.bump();
        }
    }

    /// Parse `item` repeatedly until `}`, recovering after each failed item.
    fn block_items(&mut self, mut item: impl FnMut(&mut Cursor) -> PResult<()>) -> PResult<()> {
        self.expect(Tok::LBrace)?;
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return self.unexpected("`}`");
            }
            let before = self.pos;
            if item(self).is_err() {
                if self.pos == before && !self.at(&Tok::RBrace) {
                    self.bump();
                }
                self.recover();
            }
        }
        self.bump();
        Ok(())
    }

    fn syntax_errors(&self) -> Option<LoadError> {
        (!self.diags.is_empty()).then(|| LoadError { kind: LoadErrorKind::Syntax, diagnostics: self.diags.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_domain, Controllability, GroundDomain, VarKind};

    const ROVER_DDL: &str = include_str!("../../../../fixtures/rover.ddl");
    const ROVER_PDL: &str = include_str!("../../../../fixtures/rover.pdl");

    fn rover() -> crate::model::PlanningDomain {
        parse_ddl(ROVER_DDL).expect("rover domain parses")
    }

    #[test]
    fn rover_domain_is_valid() {
        let d = rover();
        assert_eq!(validate_domain(&d), vec![]);
        assert_eq!(d.horizon, TimeValue::finite(100));
        assert_eq!(d.components.len(), 5);
        assert_eq!(d.rules.len(), 3);
    }

    #[test]
    fn navigation_block() {
        let d = rover();
        let nav = d.type_named("NavigationType").unwrap();
        assert_eq!(nav.kind, VarKind::Planned);
        assert_eq!(nav.values.len(), 2);
        let going = nav.value("GoingTo").unwrap();
        assert_eq!(going.controllability, Controllability::Uncontrollable);
        assert_eq!(going.duration, Bound::closed(5, 11));
    }

    #[test]
    fn window_block_is_external_and_cyclic() {
        let d = rover();
        let w = d.type_named("WindowType").unwrap();
        assert_eq!(w.kind, VarKind::External);
        assert!(w.values.iter().all(|v| v.controllability == Controllability::Uncontrollable));
        assert_eq!(w.value("Available").unwrap().successors[0].pattern.name, "NotAvailable");
        assert_eq!(w.value("NotAvailable").unwrap().successors[0].pattern.name, "Available");
    }

    #[test]
    fn value_without_meets_is_a_syntax_error() {
        let text = ROVER_DDL.replacen("VALUE Stowing() [3, 3]\n    MEETS {\n      Stowed();\n    }", "VALUE Stowing() [3, 3]", 1);
        assert_ne!(text, ROVER_DDL);
        let e = parse_ddl(&text).unwrap_err();
        assert_eq!(e.kind, LoadErrorKind::Syntax);
        assert!(!e.diagnostics.is_empty());
    }

    #[test]
    fn independent_errors_are_all_reported() {
        let text = ROVER_DDL
            .replacen("COMPONENT Navigation : NavigationType;", "COMPONENT Navigation NavigationType;", 1)
            .replacen("COMPONENT Channel : WindowType;", "COMPONENT Channel : ;", 1)
            .replacen("PAR_TYPE NumericParameter file = [0, 100];", "PAR_TYPE NumericParameter file = [0 100];", 1);
        let e = parse_ddl(&text).unwrap_err();
        assert!(e.diagnostics.len() >= 3, "{:?}", e.diagnostics);
        let lines: Vec<usize> = e.diagnostics.iter().map(|d| d.span.line).collect();
        assert!(lines.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unknown_component_type_is_semantic() {
        let text = ROVER_DDL.replacen("COMPONENT Channel : WindowType;", "COMPONENT Channel : DoorType;", 1);
        let e = parse_ddl(&text).unwrap_err();
        assert_eq!(e.kind, LoadErrorKind::Semantic);
        assert!(e.diagnostics[0].message.contains("DoorType"));
        assert!(e.diagnostics[0].span.line > 1);
    }

    #[test]
    fn listing_window_durations_are_rejected() {
        let text = ROVER_DDL.replace("VALUE Available() [1, 100]", "VALUE Available() [1, +INF]");
        let e = parse_ddl(&text).unwrap_err();
        assert_eq!(e.kind, LoadErrorKind::Semantic);
        assert!(e.diagnostics[0].message.contains("WindowType.Available"));
    }

    #[test]
    fn listing_placed_constraint_is_out_of_scope() {
        let text = ROVER_DDL.replace("?newTarget != ?location;", "?newTarget != ?target;");
        let e = parse_ddl(&text).unwrap_err();
        assert_eq!(e.kind, LoadErrorKind::Semantic);
        assert!(e.diagnostics[0].message.contains("?target"));
    }

    #[test]
    fn domain_round_trip() {
        let d = rover();
        let printed = print_domain(&d);
        let again = parse_ddl(&printed).unwrap();
        assert_eq!(again, d);
        assert_eq!(print_domain(&again), printed);
    }

    #[test]
    fn empty_synchronize_section_is_omitted() {
        let mut d = rover();
        d.rules.clear();
        assert!(!print_domain(&d).contains("SYNCHRONIZE"));
    }

    #[test]
    fn rover_problem() {
        let d = rover();
        let p = parse_pdl(ROVER_PDL, &d).unwrap();
        assert_eq!(p.facts.len(), 3);
        assert_eq!(p.facts[0].value.to_string(), "At(home)");
        assert_eq!(p.goal.accomplishments.len(), 1);
        let g = &p.goal.accomplishments[0];
        assert_eq!(g.value.to_string(), "TakeSample(location4, 1)");
        let w = g.window.unwrap();
        assert_eq!((w.start, w.end, w.duration), (Bound::closed(0, 35), Bound::closed(22, 65), Bound::closed(1, 45)));
        let o = p.observation("Channel").unwrap();
        assert_eq!(o.tokens.len(), 3);
        assert_eq!(o.tokens[0].start, Bound::point(0));
        assert_eq!(o.tokens[2].end, Bound::point(100));
        let gd = GroundDomain::new(&d).unwrap();
        assert!(gd.resolve(&g.component, &g.value).is_ok());
    }

    #[test]
    fn problem_round_trip() {
        let d = rover();
        let p = parse_pdl(ROVER_PDL, &d).unwrap();
        let printed = print_problem(&p);
        assert_eq!(parse_pdl(&printed, &d).unwrap(), p);
    }

    #[test]
    fn listing_goal_component_and_location_are_rejected() {
        let d = rover();
        let text = ROVER_PDL.replace("RoverController.TakeSample", "Rover.TakeSample");
        let e = parse_pdl(&text, &d).unwrap_err();
        assert!(e.diagnostics[0].message.contains("unknown component Rover"));
        let text = ROVER_PDL.replace("location4", "location5");
        let e = parse_pdl(&text, &d).unwrap_err();
        assert!(e.diagnostics[0].message.contains("location5"));
    }

    #[test]
    fn observation_ending_before_horizon() {
        let d = rover();
        let text = ROVER_PDL.replace("[80, 85] [100, 100] [15, 20]", "[80, 85] [95, 95] [10, 15]");
        let e = parse_pdl(&text, &d).unwrap_err();
        assert_eq!(e.kind, LoadErrorKind::Semantic);
        assert!(e.diagnostics.iter().any(|d| d.message.contains("before the horizon")));
    }

    #[test]
    fn missing_observation_and_external_goal() {
        let d = rover();
        let text: String = ROVER_PDL.lines().filter(|l| !l.contains("Channel")).collect::<Vec<_>>().join("\n");
        let e = parse_pdl(&text, &d).unwrap_err();
        assert!(e.diagnostics[0].message.contains("no observation timeline"));
        let text = ROVER_PDL.replace("  ?f = 1;", "  ?f = 1;\n  g1 goal Channel.Available();");
        let e = parse_pdl(&text, &d).unwrap_err();
        assert!(e.diagnostics.iter().any(|d| d.message.contains("external")));
    }

    #[test]
    fn relational_goal_disjunction() {
        let d = rover();
        let text = ROVER_PDL.replace(
            "  ?f = 1;",
            "  ?f = 1;\n  g1 goal Communication.SendData(2);\n  { g0 BEFORE [0, 65] g1; } OR { g1 BEFORE [0, +INF] g0; }",
        );
        let p = parse_pdl(&text, &d).unwrap();
        assert_eq!(p.goal.relational.len(), 2);
        assert_eq!(parse_pdl(&print_problem(&p), &d).unwrap(), p);
    }
}
