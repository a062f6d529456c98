//! `tbp`: check models, solve problems, validate plans, execute them and export Gantt charts.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tbp_core::executor::{
    execute_with_replanning, plan_gantt, trace_gantt, ExecConfig, ExecutionTrace, GanttRow, ReplanConfig,
    ReplanOutcome, Scenario,
};
use tbp_core::model::{GroundDomain, PlanningDomain, PlanningProblem};
use tbp_core::parser::{parse_ddl, parse_pdl, LoadError, LoadErrorKind};
use tbp_core::plan::Plan;
use tbp_core::solver::{Budget, Outcome, Pipeline, Solver, SolverConfig, Strategy};
use tbp_core::validator::{
    check_goal_fulfilled, check_pseudo_controllability, check_scheduled_validity, check_solution, sample_instances,
};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Code {
    Ok = 0,
    NoSolution = 1,
    Parse = 2,
    Invalid = 3,
    Abort = 4,
    Budget = 5,
}

/// An error that carries its exit code.
#[derive(Debug)]
struct Coded(Code, String);

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Coded {}

fn fail(code: Code, msg: impl Into<String>) -> anyhow::Error {
    Coded(code, msg.into()).into()
}

#[derive(Parser)]
#[command(name = "tbp", version, about = "Timeline-based planning: check, solve, validate, execute")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a domain and optionally a problem, printing diagnostics.
    Check {
        ddl: PathBuf,
        pdl: Option<PathBuf>,
    },
    /// Search for a plan and write it as JSON.
    Solve {
        ddl: PathBuf,
        pdl: PathBuf,
        #[command(flatten)]
        search: SearchOpts,
        /// Plan file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Search trace, one JSON record per expanded node.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check a plan against its domain and problem.
    Validate {
        plan: PathBuf,
        ddl: PathBuf,
        pdl: PathBuf,
        /// Also check this many sampled instances.
        #[arg(long, default_value_t = 0, requires = "seed")]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a plan against a scripted environment, replanning on failure.
    Execute {
        plan: PathBuf,
        scenario: PathBuf,
        #[arg(long)]
        ddl: PathBuf,
        #[arg(long)]
        pdl: PathBuf,
        #[command(flatten)]
        search: SearchOpts,
        /// Wall-clock tick length; the logical clock runs unthrottled when omitted.
        #[arg(long)]
        tick_ms: Option<u64>,
        #[arg(long, default_value_t = 1)]
        max_replans: usize,
        /// Final execution trace as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Execution log, one JSON record per status change.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Gantt rows of a plan or an execution trace as CSV.
    Gantt { file: PathBuf },
}

#[derive(Args, Clone)]
struct SearchOpts {
    #[arg(long, default_value = "makespan")]
    strategy: Strategy,
    #[arg(long, default_value = "type,hierarchy,failfirst")]
    pipeline: Pipeline,
    #[arg(long, default_value_t = 100_000)]
    budget_nodes: u64,
    #[arg(long, default_value_t = 60)]
    budget_secs: u64,
    /// Prefer plans whose uncontrollable durations are left untouched.
    #[arg(long)]
    pseudo_controllability: bool,
}

/// Everything a run needs besides its input files.
#[derive(Clone, Debug)]
struct RunConfig {
    solver: SolverConfig,
    exec: ExecConfig,
    max_replans: usize,
}

impl RunConfig {
    fn new(s: &SearchOpts, tick_ms: Option<u64>, max_replans: usize) -> RunConfig {
        let solver = SolverConfig {
            strategy: s.strategy,
            pipeline: s.pipeline.clone(),
            budget: Budget { nodes: s.budget_nodes, time: Some(Duration::from_secs(s.budget_secs)) },
            pseudo_controllability: s.pseudo_controllability,
            ..Default::default()
        };
        let exec = tick_ms.map(ExecConfig::wall_clock).unwrap_or_default();
        RunConfig { solver, exec, max_replans }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| fail(Code::Parse, format!("{}: {e}", path.display())))
}

fn load_failure(e: LoadError, path: &Path) -> anyhow::Error {
    let e = e.with_file(&path.display().to_string());
    let code = match e.kind {
        LoadErrorKind::Syntax => Code::Parse,
        LoadErrorKind::Semantic => Code::Invalid,
    };
    let lines: Vec<String> = e.diagnostics.iter().map(|d| d.to_string()).collect();
    fail(code, lines.join("\n"))
}

fn load_domain(path: &Path) -> Result<PlanningDomain> {
    parse_ddl(&read(path)?).map_err(|e| load_failure(e, path))
}

fn load_problem(ddl: &Path, pdl: &Path) -> Result<PlanningProblem> {
    let d = load_domain(ddl)?;
    parse_pdl(&read(pdl)?, &d).map_err(|e| load_failure(e, pdl))
}

fn load_plan(path: &Path) -> Result<Plan> {
    Plan::from_json(&read(path)?).map_err(|e| fail(Code::Parse, format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn cmd_check(ddl: &Path, pdl: Option<&Path>) -> Result<Code> {
    let d = load_domain(ddl)?;
    println!("{}: domain {} with {} components, {} synchronizations", ddl.display(), d.name, d.components.len(), d.rules.len());
    if let Some(pdl) = pdl {
        let p = parse_pdl(&read(pdl)?, &d).map_err(|e| load_failure(e, pdl))?;
        println!(
            "{}: problem {} with {} facts, {} goals, {} observed timelines",
            pdl.display(),
            p.name,
            p.facts.len(),
            p.goal.accomplishments.len(),
            p.observations.len()
        );
    }
    Ok(Code::Ok)
}

fn cmd_solve(ddl: &Path, pdl: &Path, cfg: &RunConfig, out: Option<&Path>, trace: Option<&Path>) -> Result<Code> {
    let problem = load_problem(ddl, pdl)?;
    let mut sink: Box<dyn Write> = match trace {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::sink()),
    };
    let outcome = Solver::new(cfg.solver.clone()).with_trace(&mut sink).solve(&problem)?;
    drop(sink);
    let stats = outcome.stats();
    let code = match &outcome {
        Outcome::Solved { plan, pseudo_controllable, .. } => {
            write_out(out, &plan.to_json())?;
            eprintln!("solved: {} tokens, pseudo-controllable {pseudo_controllable}", plan.token_count());
            Code::Ok
        }
        Outcome::NoSolution { .. } => {
            eprintln!("no solution");
            Code::NoSolution
        }
        Outcome::Budget { limit, .. } => {
            eprintln!("search budget exhausted ({limit:?})");
            Code::Budget
        }
    };
    eprintln!("expanded {} nodes, generated {}, dead ends {}, max depth {}", stats.expanded, stats.generated, stats.dead_ends, stats.max_depth);
    Ok(code)
}

fn cmd_validate(plan: &Path, ddl: &Path, pdl: &Path, samples: usize, seed: Option<u64>) -> Result<Code> {
    let problem = load_problem(ddl, pdl)?;
    let plan = load_plan(plan)?;
    let gd = GroundDomain::new(&problem.domain)?;
    let report = check_solution(&plan, &problem)?;
    let mut ok = report.passed();
    if ok {
        println!("solution: ok");
    } else {
        println!("solution:\n{report}");
    }
    let squeezed = check_pseudo_controllability(&plan, &gd);
    if squeezed.is_empty() {
        println!("pseudo-controllability: ok");
    } else {
        let names: Vec<String> = squeezed.iter().map(|t| t.to_string()).collect();
        println!("pseudo-controllability: squeezed {}", names.join(", "));
        if plan.pseudo_controllable {
            println!("plan claims to be pseudo-controllable");
            ok = false;
        }
    }
    if samples > 0 {
        let seed = seed.expect("clap enforces --seed");
        let mut bad = 0;
        for (i, s) in sample_instances(&plan, samples, seed)?.iter().enumerate() {
            let v = check_scheduled_validity(s, &gd)?;
            let g = check_goal_fulfilled(s, &problem)?;
            if !v.passed() || !g.passed() {
                bad += 1;
                println!("instance {i}:\n{v}{g}");
            }
        }
        println!("instances: {} of {samples} valid", samples - bad);
        ok &= bad == 0;
    }
    Ok(if ok { Code::Ok } else { Code::Invalid })
}

#[allow(clippy::too_many_arguments)]
fn cmd_execute(
    plan: &Path,
    scenario: &Path,
    ddl: &Path,
    pdl: &Path,
    cfg: &RunConfig,
    out: Option<&Path>,
    log_path: Option<&Path>,
) -> Result<Code> {
    let problem = load_problem(ddl, pdl)?;
    let plan = load_plan(plan)?;
    let scenario = Scenario::from_json(&read(scenario)?).map_err(|e| fail(Code::Parse, format!("{}: {e}", scenario.display())))?;
    let report = check_solution(&plan, &problem)?;
    if !report.passed() {
        return Err(fail(Code::Invalid, format!("plan is not a solution:\n{report}")));
    }
    let rc = ReplanConfig { max_replans: cfg.max_replans, solver: cfg.solver.clone(), exec: cfg.exec };
    let outcome = execute_with_replanning(&problem, &plan, &scenario, &rc)?;
    for (i, f) in outcome.failures().iter().enumerate() {
        eprintln!("failure {}: {f}", i + 1);
    }
    let trace = outcome.trace();
    if let Some(p) = log_path {
        let mut w = io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
        trace.write_log(&mut w)?;
    }
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(trace)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(match outcome {
        ReplanOutcome::Completed { failures, trace, .. } => {
            eprintln!("completed at tick {} after {} replan(s)", trace.last_tick, failures.len());
            Code::Ok
        }
        ReplanOutcome::Aborted { failures, .. } => {
            eprintln!("aborted after {} failure(s)", failures.len());
            Code::Abort
        }
    })
}

fn cmd_gantt(file: &Path) -> Result<Code> {
    let text = read(file)?;
    let rows: Vec<GanttRow> = match Plan::from_json(&text) {
        Ok(plan) => plan_gantt(&plan)?,
        Err(_) => {
            let trace: ExecutionTrace = serde_json::from_str(&text)
                .map_err(|e| fail(Code::Parse, format!("{}: neither a plan nor a trace: {e}", file.display())))?;
            trace_gantt(&trace)
        }
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(io::stdout());
    w.write_record(["timeline", "value", "start", "end", "controllability", "status"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(Code::Ok)
}

fn run(cli: Cli) -> Result<Code> {
    match cli.command {
        Command::Check { ddl, pdl } => cmd_check(&ddl, pdl.as_deref()),
        Command::Solve { ddl, pdl, search, out, trace } => {
            cmd_solve(&ddl, &pdl, &RunConfig::new(&search, None, 0), out.as_deref(), trace.as_deref())
        }
        Command::Validate { plan, ddl, pdl, samples, seed } => cmd_validate(&plan, &ddl, &pdl, samples, seed),
        Command::Execute { plan, scenario, ddl, pdl, search, tick_ms, max_replans, out, log } => {
            let cfg = RunConfig::new(&search, tick_ms, max_replans);
            cmd_execute(&plan, &scenario, &ddl, &pdl, &cfg, out.as_deref(), log.as_deref())
        }
        Command::Gantt { file } => cmd_gantt(&file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TBP_LOG")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = e.downcast_ref::<Coded>().map(|c| c.0).unwrap_or(Code::Parse);
            eprintln!("error: {e:#}");
            code
        }
    };
    ExitCode::from(code as u8)
}
