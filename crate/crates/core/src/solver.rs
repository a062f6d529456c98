//! Flaw-based refinement search with pluggable strategies and flaw filters.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::model::{GroundDomain, Operand, PlanningProblem, VarId};
use crate::plan::Plan;
use crate::plandb::{Flaw, FlawKind, PlanDatabase, PlanDbError, Refinement};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Db(#[from] PlanDbError),
    #[error("unknown {0} `{1}`")]
    UnknownName(&'static str, String),
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}

/// Component dependencies induced by synchronization rules, kept acyclic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
    /// Edges dropped because they would have closed a cycle.
    pub discarded: Vec<(usize, usize)>,
}

impl DependencyGraph {
    pub fn build(gd: &GroundDomain) -> DependencyGraph {
        let mut g = DependencyGraph {
            nodes: gd.vars.iter().map(|v| v.name.clone()).collect(),
            edges: BTreeSet::new(),
            discarded: vec![],
        };
        for r in &gd.rules {
            let Some((src, _)) = r.trigger else { continue };
            for d in &r.disjuncts {
                let var_of = |op: &Operand| match op {
                    Operand::Trigger => Some(src),
                    Operand::Var(v) => d.slot(v).map(|s| s.var),
                };
                for a in &d.atoms {
                    // A relation between the trigger and a slot, or between two slots, makes the
                    // trigger's component depend on the slot's.
                    let targets: Vec<VarId> = std::iter::once(&a.left).chain(&a.right).filter_map(var_of).collect();
                    for t in targets {
                        g.add(src.0, t.0);
                    }
                }
                for s in &d.slots {
                    g.add(src.0, s.var.0);
                }
            }
        }
        g
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.edges.iter().filter(|e| e.0 == n).map(|e| e.1));
            }
        }
        false
    }

    /// Adds `a → b` unless reflexive, present, or cycle-closing.
    pub fn add(&mut self, a: usize, b: usize) {
        if a == b || self.edges.contains(&(a, b)) {
            return;
        }
        if self.reaches(b, a) {
            if !self.discarded.contains(&(a, b)) {
                self.discarded.push((a, b));
            }
            return;
        }
        self.edges.insert((a, b));
    }

    pub fn edge_names(&self) -> Vec<(&str, &str)> {
        self.edges.iter().map(|&(a, b)| (self.nodes[a].as_str(), self.nodes[b].as_str())).collect()
    }

    /// Ranks with every sink on the deepest level and every other node one above its
    /// highest-ranked successor, so independent components rank first.
    pub fn levels(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let succ = |i: usize| self.edges.iter().filter(move |e| e.0 == i).map(|e| e.1);
        // Height: longest path to a sink.
        let mut height: Vec<Option<usize>> = vec![None; n];
        fn h(i: usize, height: &mut Vec<Option<usize>>, succ: &dyn Fn(usize) -> Vec<usize>) -> usize {
            if let Some(x) = height[i] {
                return x;
            }
            let v = succ(i).into_iter().map(|j| h(j, height, succ) + 1).max().unwrap_or(0);
            height[i] = Some(v);
            v
        }
        let succ_vec = |i: usize| succ(i).collect::<Vec<_>>();
        for i in 0..n {
            h(i, &mut height, &succ_vec);
        }
        let depth = height.iter().flatten().copied().max().unwrap_or(0);
        let mut rank = vec![usize::MAX; n];
        // Process by increasing height: sinks sit at `depth`, parents just above their closest child.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| height[i]);
        for i in order {
            rank[i] = succ(i).map(|j| rank[j].saturating_sub(1)).min().unwrap_or(depth);
        }
        rank
    }

    pub fn level_map(&self) -> BTreeMap<String, usize> {
        self.nodes.iter().cloned().zip(self.levels()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlawFilter {
    TypeFilter,
    FailFirst,
    HierarchyFilter,
}

impl FromStr for FlawFilter {
    type Err = SolveError;
    fn from_str(s: &str) -> Result<Self, SolveError> {
        match s {
            "type" | "type_filter" => Ok(FlawFilter::TypeFilter),
            "failfirst" | "fail_first" => Ok(FlawFilter::FailFirst),
            "hierarchy" | "hierarchy_filter" => Ok(FlawFilter::HierarchyFilter),
            _ => Err(SolveError::UnknownName("filter", s.into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pipeline(pub Vec<FlawFilter>);

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline(vec![FlawFilter::TypeFilter, FlawFilter::HierarchyFilter, FlawFilter::FailFirst])
    }
}

impl FromStr for Pipeline {
    type Err = SolveError;
    /// Comma-separated filter names; the empty string is the empty pipeline.
    fn from_str(s: &str) -> Result<Self, SolveError> {
        s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::parse).collect::<Result<_, _>>().map(Pipeline)
    }
}

/// A flaw together with its consistent refinements.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub flaw: Flaw,
    pub refinements: Vec<Refinement>,
}

/// Applies each filter in turn; every filter keeps a non-empty subset.
pub fn filter_flaws(pipeline: &Pipeline, levels: &[usize], db: &PlanDatabase, flaws: Vec<Candidate>) -> Vec<Candidate> {
    let mut cur = flaws;
    for f in &pipeline.0 {
        if cur.len() <= 1 {
            break;
        }
        cur = match f {
            FlawFilter::TypeFilter => {
                let best = cur.iter().map(|c| c.flaw.kind()).min().expect("non-empty");
                cur.into_iter().filter(|c| c.flaw.kind() == best).collect()
            }
            FlawFilter::FailFirst => {
                let best = cur.iter().map(|c| c.refinements.len()).min().expect("non-empty");
                cur.into_iter().filter(|c| c.refinements.len() == best).collect()
            }
            FlawFilter::HierarchyFilter => {
                // The goal rule sits above every component.
                let rank = |c: &Candidate| db.flaw_var(&c.flaw).map(|v| levels[v.0] + 1).unwrap_or(0);
                let best = cur.iter().map(rank).min().expect("non-empty");
                cur.into_iter().filter(|c| rank(c) == best).collect()
            }
        };
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DepthFirst,
    Makespan,
}

impl FromStr for Strategy {
    type Err = SolveError;
    fn from_str(s: &str) -> Result<Self, SolveError> {
        match s {
            "dfs" | "depth_first" | "depthfirst" => Ok(Strategy::DepthFirst),
            "makespan" => Ok(Strategy::Makespan),
            _ => Err(SolveError::UnknownName("strategy", s.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub nodes: u64,
    pub time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { nodes: 100_000, time: Some(Duration::from_secs(60)) }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub strategy: Strategy,
    pub pipeline: Pipeline,
    pub budget: Budget,
    /// Keep nodes with squeezed contingent links in a second fringe.
    pub pseudo_controllability: bool,
    pub max_gap_path: usize,
    /// Branch on every flaw left by the pipeline instead of the first one.
    pub branch_all_equivalent: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            strategy: Strategy::Makespan,
            pipeline: Pipeline::default(),
            budget: Budget::default(),
            pseudo_controllability: true,
            max_gap_path: crate::plandb::DEFAULT_MAX_GAP_PATH,
            branch_all_equivalent: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
    pub dead_ends: u64,
    pub max_depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhausted {
    Nodes,
    Time,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Solved { plan: Plan, pseudo_controllable: bool, stats: SearchStats },
    NoSolution { stats: SearchStats },
    Budget { limit: Exhausted, stats: SearchStats },
}

impl Outcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            Outcome::Solved { plan, .. } => Some(plan),
            _ => None,
        }
    }

    pub fn stats(&self) -> SearchStats {
        match self {
            Outcome::Solved { stats, .. } | Outcome::NoSolution { stats } | Outcome::Budget { stats, .. } => *stats,
        }
    }
}

/// One record per expanded node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub node: usize,
    pub depth: usize,
    pub makespan: u64,
    pub pseudo_controllable: bool,
    pub flaws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flaw: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flaw_kind: Option<FlawKind>,
    pub refinements: Vec<&'static str>,
    pub children: usize,
}

struct Node {
    parent: Option<usize>,
    refinement: Option<Refinement>,
    depth: usize,
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    primary: Reverse<u64>,
    depth: usize,
    seq: Reverse<u64>,
}

/// Open nodes ordered by the strategy; ties go to the earliest inserted.
struct Fringe {
    heap: BinaryHeap<(Key, usize)>,
}

impl Fringe {
    fn new() -> Fringe {
        Fringe { heap: BinaryHeap::new() }
    }

    fn push(&mut self, strategy: Strategy, node: usize, depth: usize, makespan: u64, seq: u64) {
        let key = match strategy {
            // Deepest first; among siblings the first refinement wins.
            Strategy::DepthFirst => Key { primary: Reverse(0), depth, seq: Reverse(seq) },
            Strategy::Makespan => Key { primary: Reverse(makespan), depth, seq: Reverse(seq) },
        };
        self.heap.push((key, node));
    }

    fn pop(&mut self) -> Option<usize> {
        self.heap.pop().map(|(_, n)| n)
    }
}

pub struct Solver<'a> {
    config: SolverConfig,
    trace: Option<&'a mut dyn Write>,
    records: Vec<TraceRecord>,
    keep_records: bool,
}

impl<'a> Solver<'a> {
    pub fn new(config: SolverConfig) -> Solver<'a> {
        Solver { config, trace: None, records: vec![], keep_records: false }
    }

    /// Writes one JSON line per expansion to `out`.
    pub fn with_trace(mut self, out: &'a mut dyn Write) -> Self {
        self.trace = Some(out);
        self
    }

    /// Keeps the trace in memory, see [`Solver::records`].
    pub fn recording(mut self) -> Self {
        self.keep_records = true;
        self
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn solve(&mut self, problem: &PlanningProblem) -> Result<Outcome, SolveError> {
        let mut db = PlanDatabase::init(problem)?;
        db.set_max_gap_path(self.config.max_gap_path);
        self.search(db)
    }

    fn emit(&mut self, r: TraceRecord) -> Result<(), SolveError> {
        if let Some(out) = self.trace.as_deref_mut() {
            serde_json::to_writer(&mut *out, &r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        if self.keep_records {
            self.records.push(r);
        }
        Ok(())
    }

    /// Moves `db` to the state of node `target` by retracting to the common ancestor and replaying.
    fn goto(db: &mut PlanDatabase, nodes: &[Node], current: &mut Vec<usize>, target: usize) -> Result<(), SolveError> {
        let mut path = vec![];
        let mut n = Some(target);
        while let Some(i) = n {
            path.push(i);
            n = nodes[i].parent;
        }
        path.reverse();
        let common = current.iter().zip(&path).take_while(|(a, b)| a == b).count();
        while current.len() > common {
            db.retract()?;
            current.pop();
        }
        for &i in &path[common..] {
            if let Some(r) = &nodes[i].refinement {
                db.apply(r)?;
            }
            current.push(i);
        }
        Ok(())
    }

    pub fn search(&mut self, mut db: PlanDatabase) -> Result<Outcome, SolveError> {
        let gd = db.shared_domain();
        let levels = DependencyGraph::build(&gd).levels();
        let cfg = self.config.clone();
        let started = cfg.budget.time.map(|t| (Instant::now(), t));
        let mut stats = SearchStats::default();
        let mut nodes = vec![Node { parent: None, refinement: None, depth: 0 }];
        let mut current = vec![0usize];
        let mut pc = Fringe::new();
        let mut npc = Fringe::new();
        let mut seq = 0u64;
        if db.is_pseudo_controllable() || !cfg.pseudo_controllability {
            pc.push(cfg.strategy, 0, 0, db.makespan(), seq);
        } else {
            npc.push(cfg.strategy, 0, 0, db.makespan(), seq);
        }
        loop {
            let Some(id) = pc.pop().or_else(|| npc.pop()) else {
                return Ok(Outcome::NoSolution { stats });
            };
            if stats.expanded >= cfg.budget.nodes {
                return Ok(Outcome::Budget { limit: Exhausted::Nodes, stats });
            }
            if let Some((t0, limit)) = started {
                if t0.elapsed() >= limit {
                    return Ok(Outcome::Budget { limit: Exhausted::Time, stats });
                }
            }
            Self::goto(&mut db, &nodes, &mut current, id)?;
            stats.expanded += 1;
            let depth = nodes[id].depth;
            stats.max_depth = stats.max_depth.max(depth);
            let flaws = db.detect_flaws();
            let mut record = TraceRecord {
                node: id,
                depth,
                makespan: db.makespan(),
                pseudo_controllable: db.is_pseudo_controllable(),
                flaws: flaws.len(),
                flaw: None,
                flaw_kind: None,
                refinements: vec![],
                children: 0,
            };
            if flaws.is_empty() {
                let pseudo_controllable = db.is_pseudo_controllable();
                let mut plan = db.to_plan()?;
                plan.pseudo_controllable = pseudo_controllable;
                self.emit(record)?;
                return Ok(Outcome::Solved { plan, pseudo_controllable, stats });
            }
            // Type filtering is cheap; computing refinements for the survivors only keeps
            // fail-first affordable.
            let mut pool: Vec<Flaw> = flaws;
            if cfg.pipeline.0.first() == Some(&FlawFilter::TypeFilter) {
                let best = pool.iter().map(Flaw::kind).min().expect("non-empty");
                pool.retain(|f| f.kind() == best);
            }
            let candidates: Vec<Candidate> = pool
                .into_iter()
                .map(|f| {
                    let refinements = db.refinements(&f);
                    Candidate { flaw: f, refinements }
                })
                .collect();
            if candidates.iter().any(|c| c.refinements.is_empty()) {
                stats.dead_ends += 1;
                let dead = candidates.iter().find(|c| c.refinements.is_empty()).expect("dead flaw");
                record.flaw = Some(db.describe(&dead.flaw));
                record.flaw_kind = Some(dead.flaw.kind());
                self.emit(record)?;
                continue;
            }
            let mut chosen = filter_flaws(&cfg.pipeline, &levels, &db, candidates);
            if !cfg.branch_all_equivalent {
                // Every flaw must be resolved eventually, so one branching point suffices.
                chosen.truncate(1);
            }
            record.flaw = Some(chosen.iter().map(|c| db.describe(&c.flaw)).collect::<Vec<_>>().join("; "));
            record.flaw_kind = chosen.first().map(|c| c.flaw.kind());
            for c in &chosen {
                for r in &c.refinements {
                    record.refinements.push(r.name());
                    db.apply(r)?;
                    current.push(usize::MAX);
                    let ok = db.is_consistent();
                    let (mk, is_pc) = (db.makespan(), db.is_pseudo_controllable());
                    db.retract()?;
                    current.pop();
                    if !ok {
                        continue;
                    }
                    let child = nodes.len();
                    nodes.push(Node { parent: Some(id), refinement: Some(r.clone()), depth: depth + 1 });
                    seq += 1;
                    stats.generated += 1;
                    record.children += 1;
                    if is_pc || !cfg.pseudo_controllability {
                        pc.push(cfg.strategy, child, depth + 1, mk, seq);
                    } else {
                        npc.push(cfg.strategy, child, depth + 1, mk, seq);
                    }
                }
            }
            self.emit(record)?;
        }
    }
}

/// Convenience wrapper with the default configuration.
pub fn solve(problem: &PlanningProblem) -> Result<Outcome, SolveError> {
    Solver::new(SolverConfig::default()).solve(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_ddl, parse_pdl};
    use crate::plandb::TokId;
    use crate::validator::check_pseudo_controllability;

    const ROVER_DDL: &str = include_str!("../../../fixtures/rover.ddl");

    fn graph_of(ddl: &str) -> DependencyGraph {
        DependencyGraph::build(&GroundDomain::new(&parse_ddl(ddl).unwrap()).unwrap())
    }

    /// Planned variables A, B, C with a single value each and the given rules.
    fn abc(rules: &str) -> String {
        let mut s = String::from("DOMAIN G\n{\n  TEMPORAL_MODULE tm = [0, 100];\n");
        for v in ["A", "B", "C"] {
            s += &format!("  COMP_TYPE StateVariable {v}T (V())\n  {{\n    VALUE V() [1, +INF]\n    MEETS {{\n      V();\n    }}\n  }}\n");
        }
        for v in ["A", "B", "C"] {
            s += &format!("  COMPONENT {v} : {v}T;\n");
        }
        s + rules + "}\n"
    }

    fn sync(from: &str, to: &str) -> String {
        format!("  SYNCHRONIZE {from}\n  {{\n    VALUE V()\n    {{\n      a1 {to}.V();\n      DURING [0, +INF] [0, +INF] a1;\n    }}\n  }}\n")
    }

    #[test]
    fn rover_dependency_graph_and_ranks() {
        let g = graph_of(ROVER_DDL);
        let mut edges = g.edge_names();
        edges.sort();
        assert_eq!(
            edges,
            vec![
                ("Communication", "Channel"),
                ("Communication", "Navigation"),
                ("Navigation", "Instrument"),
                ("RoverController", "Communication"),
                ("RoverController", "Instrument"),
                ("RoverController", "Navigation"),
            ]
        );
        assert!(g.discarded.is_empty());
        let r = g.level_map();
        assert_eq!(
            (r["RoverController"], r["Communication"], r["Navigation"], r["Instrument"], r["Channel"]),
            (0, 1, 2, 3, 3)
        );
    }

    #[test]
    fn cycle_closing_edge_is_discarded() {
        let g = graph_of(&abc(&(sync("A", "B") + &sync("B", "A"))));
        assert_eq!(g.edge_names(), vec![("A", "B")]);
        assert_eq!(g.discarded, vec![(1, 0)]);
    }

    #[test]
    fn ranks_of_trivial_graphs() {
        assert_eq!(graph_of(&abc("")).levels(), vec![0, 0, 0]);
        assert_eq!(graph_of(&abc(&(sync("A", "B") + &sync("B", "C")))).levels(), vec![0, 1, 2]);
    }

    fn cand(db: &PlanDatabase, flaw: Flaw, n: usize) -> Candidate {
        let _ = db;
        Candidate { flaw, refinements: vec![Refinement::PinStart { token: TokId(0) }; n] }
    }

    fn rover_db() -> PlanDatabase {
        let d = parse_ddl(ROVER_DDL).unwrap();
        let p = parse_pdl(include_str!("../../../fixtures/rover.pdl"), &d).unwrap();
        PlanDatabase::init(&p).unwrap()
    }

    #[test]
    fn filters_narrow_as_documented() {
        let db = rover_db();
        let levels = DependencyGraph::build(db.domain()).levels();
        let goal = Flaw::Goal { token: db.pending_goals()[0] };
        let t1 = Flaw::Threat { a: TokId(0), b: TokId(1) };
        let t2 = Flaw::Threat { a: TokId(1), b: TokId(2) };
        let flaws = vec![cand(&db, t1.clone(), 2), cand(&db, goal.clone(), 3), cand(&db, t2.clone(), 2)];
        let only = |p: Vec<FlawFilter>| {
            filter_flaws(&Pipeline(p), &levels, &db, flaws.clone()).into_iter().map(|c| c.flaw).collect::<Vec<_>>()
        };
        assert_eq!(only(vec![FlawFilter::TypeFilter]), vec![goal.clone()]);
        assert_eq!(only(vec![FlawFilter::FailFirst]), vec![t1.clone(), t2.clone()]);
        assert_eq!(only(vec![]), vec![t1.clone(), goal.clone(), t2.clone()]);
        // The goal lives on the controller, the most independent component.
        assert_eq!(only(vec![FlawFilter::HierarchyFilter]), vec![goal]);
    }

    #[test]
    fn pipeline_names_parse() {
        assert_eq!("type,hierarchy,failfirst".parse::<Pipeline>().unwrap(), Pipeline::default());
        assert_eq!("".parse::<Pipeline>().unwrap(), Pipeline(vec![]));
        assert!("fastest".parse::<Pipeline>().is_err());
        assert_eq!("dfs".parse::<Strategy>().unwrap(), Strategy::DepthFirst);
    }

    const SQUEEZE_DDL: &str = "DOMAIN Squeeze
{
  TEMPORAL_MODULE tm = [0, 50];
  COMP_TYPE StateVariable WorkType (Idle(), Work())
  {
    VALUE Idle() [1, +INF]
    MEETS {
      Work();
    }
    VALUE uncontrollable Work() [5, 10]
    MEETS {
      Idle();
    }
  }
  COMP_TYPE StateVariable SlotType (Free(), Short())
  {
    VALUE Free() [1, +INF]
    MEETS {
      Short();
    }
    VALUE Short() [6, 6]
    MEETS {
      Free();
    }
  }
  COMPONENT w : WorkType;
  COMPONENT s : SlotType;
  SYNCHRONIZE w
  {
    VALUE Work()
    {
      a1 s.Short();
      DURING [0, +INF] [0, +INF] a1;
    }
  }
}
";

    fn squeeze_problem() -> PlanningProblem {
        let d = parse_ddl(SQUEEZE_DDL).unwrap();
        parse_pdl("PROBLEM Q (DOMAIN Squeeze)\n{\n  g0 goal w.Work();\n}\n", &d).unwrap()
    }

    #[test]
    fn forced_squeeze_yields_a_non_pseudo_controllable_plan() {
        let p = squeeze_problem();
        let out = Solver::new(SolverConfig::default()).solve(&p).unwrap();
        let Outcome::Solved { plan, pseudo_controllable, .. } = out else { panic!("{out:?}") };
        assert!(!pseudo_controllable);
        assert!(!plan.pseudo_controllable);
        let gd = GroundDomain::new(&p.domain).unwrap();
        let squeezed = check_pseudo_controllability(&plan, &gd);
        assert_eq!(squeezed.len(), 1);
        let tok = plan.token(&squeezed[0]).unwrap();
        assert_eq!(tok.value, "Work");
        assert_eq!(tok.duration.ub, 6.into());
    }

    #[test]
    fn unsolvable_goal_exhausts_the_fringe() {
        // Work cannot fit in a 4-tick horizon.
        let mut p = squeeze_problem();
        p.horizon = 4.into();
        let out = Solver::new(SolverConfig::default()).solve(&p).unwrap();
        assert!(matches!(out, Outcome::NoSolution { .. }), "{out:?}");
    }

    #[test]
    fn node_budget_is_reported_separately() {
        let p = squeeze_problem();
        let cfg = SolverConfig { budget: Budget { nodes: 1, time: None }, ..Default::default() };
        let out = Solver::new(cfg).solve(&p).unwrap();
        assert!(matches!(out, Outcome::Budget { limit: Exhausted::Nodes, .. }), "{out:?}");
    }
}
