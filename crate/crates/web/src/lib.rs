//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes model text and returns a JSON string, so the page needs no
//! generated type definitions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tbp_core::executor::{
    execute_with_replanning, plan_gantt, trace_gantt, GanttRow, ReplanConfig, ReplanOutcome, Scenario,
};
use tbp_core::model::{PlanningDomain, PlanningProblem};
use tbp_core::parser::{parse_ddl, parse_pdl, LoadError};
use tbp_core::plan::Plan;
use tbp_core::solver::{Budget, Outcome, SearchStats, Solver, SolverConfig};

pub const ROVER_DDL: &str = include_str!("../../../fixtures/rover.ddl");
pub const ROVER_PDL: &str = include_str!("../../../fixtures/rover.pdl");

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub source: &'static str,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub ok: bool,
    pub summary: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    /// `solved`, `no_solution` or `budget`.
    pub status: &'static str,
    pub stats: SearchStats,
    pub pseudo_controllable: bool,
    pub horizon: Option<u64>,
    pub plan: Option<String>,
    pub rows: Vec<GanttRow>,
}

#[derive(Debug, Serialize)]
pub struct ExecuteReport {
    pub completed: bool,
    pub failures: Vec<String>,
    pub last_tick: u64,
    pub rows: Vec<GanttRow>,
}

fn diagnostics(source: &'static str, e: LoadError) -> Vec<Diagnostic> {
    e.diagnostics
        .into_iter()
        .map(|d| Diagnostic { source, line: d.span.line, column: d.span.column, message: d.message })
        .collect()
}

fn load(ddl: &str, pdl: &str) -> Result<(PlanningDomain, PlanningProblem), Vec<Diagnostic>> {
    let d = parse_ddl(ddl).map_err(|e| diagnostics("ddl", e))?;
    let p = parse_pdl(pdl, &d).map_err(|e| diagnostics("pdl", e))?;
    Ok((d, p))
}

fn load_or_message(ddl: &str, pdl: &str) -> Result<PlanningProblem, String> {
    load(ddl, pdl).map(|(_, p)| p).map_err(|ds| {
        ds.iter().map(|d| format!("{} {}:{}: {}", d.source, d.line, d.column, d.message)).collect::<Vec<_>>().join("\n")
    })
}

pub fn check_models(ddl: &str, pdl: &str) -> CheckReport {
    match load(ddl, pdl) {
        Ok((d, p)) => CheckReport {
            ok: true,
            summary: format!(
                "domain {}: {} components, {} synchronizations; problem {}: {} facts, {} goals",
                d.name,
                d.components.len(),
                d.rules.len(),
                p.name,
                p.facts.len(),
                p.goal.accomplishments.len()
            ),
            diagnostics: vec![],
        },
        Err(diagnostics) => CheckReport { ok: false, summary: format!("{} error(s)", diagnostics.len()), diagnostics },
    }
}

pub fn solve_models(ddl: &str, pdl: &str, max_nodes: u64) -> Result<SolveReport, String> {
    let problem = load_or_message(ddl, pdl)?;
    // No wall-clock budget: `Instant` is unavailable in the browser.
    let cfg = SolverConfig { budget: Budget { nodes: max_nodes, time: None }, ..Default::default() };
    let outcome = Solver::new(cfg).solve(&problem).map_err(|e| e.to_string())?;
    let stats = outcome.stats();
    Ok(match outcome {
        Outcome::Solved { plan, pseudo_controllable, .. } => SolveReport {
            status: "solved",
            stats,
            pseudo_controllable,
            horizon: plan.horizon.get(),
            rows: plan_gantt(&plan).map_err(|e| e.to_string())?,
            plan: Some(plan.to_json()),
        },
        Outcome::NoSolution { .. } => empty_report("no_solution", stats),
        Outcome::Budget { .. } => empty_report("budget", stats),
    })
}

fn empty_report(status: &'static str, stats: SearchStats) -> SolveReport {
    SolveReport { status, stats, pseudo_controllable: false, horizon: None, plan: None, rows: vec![] }
}

pub fn execute_models(
    ddl: &str,
    pdl: &str,
    plan: &str,
    scenario: &str,
    max_replans: usize,
) -> Result<ExecuteReport, String> {
    let problem = load_or_message(ddl, pdl)?;
    let plan = Plan::from_json(plan).map_err(|e| format!("plan: {e}"))?;
    let scenario = if scenario.trim().is_empty() {
        Scenario::default()
    } else {
        Scenario::from_json(scenario).map_err(|e| format!("scenario: {e}"))?
    };
    let mut cfg = ReplanConfig { max_replans, ..Default::default() };
    cfg.solver.budget.time = None;
    let out = execute_with_replanning(&problem, &plan, &scenario, &cfg).map_err(|e| e.to_string())?;
    let failures = out.failures().iter().map(|v| v.to_string()).collect();
    let trace = out.trace();
    Ok(ExecuteReport {
        completed: matches!(out, ReplanOutcome::Completed { .. }),
        failures,
        last_tick: trace.last_tick,
        rows: trace_gantt(trace),
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn rover_ddl() -> String {
    ROVER_DDL.into()
}

#[wasm_bindgen]
pub fn rover_pdl() -> String {
    ROVER_PDL.into()
}

/// Parses both models; returns a [`CheckReport`] as JSON.
#[wasm_bindgen]
pub fn check(ddl: &str, pdl: &str) -> Result<String, JsError> {
    to_json(&check_models(ddl, pdl))
}

/// Searches for a plan; returns a [`SolveReport`] as JSON.
#[wasm_bindgen]
pub fn solve(ddl: &str, pdl: &str, max_nodes: u32) -> Result<String, JsError> {
    to_json(&solve_models(ddl, pdl, max_nodes.into()).map_err(|e| JsError::new(&e))?)
}

/// Simulates execution against a JSON scenario; returns an [`ExecuteReport`] as JSON.
#[wasm_bindgen]
pub fn execute(ddl: &str, pdl: &str, plan: &str, scenario: &str, max_replans: u32) -> Result<String, JsError> {
    to_json(&execute_models(ddl, pdl, plan, scenario, max_replans as usize).map_err(|e| JsError::new(&e))?)
}
