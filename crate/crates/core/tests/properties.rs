//! Property tests: each invariant is checked against an independent oracle.

use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use tbp_core::model::{GroundDomain, PlanningProblem};
use tbp_core::parser::{parse_ddl, parse_pdl};
use tbp_core::plan::{Plan, PlanRelation, TokenRef};
use tbp_core::plandb::PlanDatabase;
use tbp_core::relation::{Interval, Primitive, Relation, RelationKind};
use tbp_core::solver::DependencyGraph;
use tbp_core::validator::{check_plan_satisfies_rule, required_uncontrollable_windows};
use tbp_core::{Bound, PointId, TemporalNetwork, TimeValue};

fn seeded(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x7b9), failure_persistence: None, ..Config::default() }
}

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn rover() -> PlanningProblem {
    let d = parse_ddl(&fixture("rover.ddl")).unwrap();
    parse_pdl(&fixture("rover.pdl"), &d).unwrap()
}

// ---------------------------------------------------------------------------
// Temporal network against Bellman-Ford

/// `lo ≤ t_b − t_a ≤ hi` over points `0..n`, point 0 being the origin.
#[derive(Clone, Debug)]
struct Constraint {
    a: usize,
    b: usize,
    lo: Option<i64>,
    hi: Option<i64>,
}

fn networks() -> impl Strategy<Value = (usize, Vec<Constraint>)> {
    (2usize..=12).prop_flat_map(|n| {
        let c = (0..n, 0..n, proptest::option::of(-50i64..=50), proptest::option::of(-50i64..=50))
            .prop_filter("distinct endpoints", |(a, b, _, _)| a != b)
            .prop_map(|(a, b, x, y)| match (x, y) {
                (Some(x), Some(y)) => Constraint { a, b, lo: Some(x.min(y)), hi: Some(x.max(y)) },
                (lo, hi) => Constraint { a, b, lo, hi },
            });
        (Just(n), proptest::collection::vec(c, 0..30))
    })
}

const UNREACHABLE: i64 = i64::MAX / 4;

/// All-pairs shortest paths by repeated Bellman-Ford; `None` on a negative cycle.
fn oracle(n: usize, cs: &[Constraint]) -> Option<Vec<Vec<i64>>> {
    let mut edges: Vec<(usize, usize, i64)> = (1..n).map(|p| (p, 0, 0)).collect();
    for c in cs {
        if let Some(h) = c.hi {
            edges.push((c.a, c.b, h));
        }
        if let Some(l) = c.lo {
            edges.push((c.b, c.a, -l));
        }
    }
    let mut all = Vec::new();
    for s in 0..n {
        let mut d = vec![UNREACHABLE; n];
        d[s] = 0;
        for round in 0..=n {
            let mut changed = false;
            for &(u, v, w) in &edges {
                if d[u] < UNREACHABLE && d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            if round == n {
                return None;
            }
        }
        all.push(d);
    }
    Some(all)
}

fn matches_oracle(net: &TemporalNetwork, n: usize, want: &Option<Vec<Vec<i64>>>) -> Result<(), TestCaseError> {
    match want {
        None => prop_assert!(!net.is_consistent()),
        Some(d) => {
            prop_assert!(net.is_consistent());
            for a in 0..n {
                for b in 0..n {
                    let got = net.distance(PointId(a), PointId(b)).unwrap();
                    let exp = (d[a][b] < UNREACHABLE).then_some(d[a][b]);
                    prop_assert_eq!(got, exp, "d({}, {})", a, b);
                }
            }
        }
    }
    Ok(())
}

fn build(n: usize) -> TemporalNetwork {
    let mut net = TemporalNetwork::new();
    for _ in 1..n {
        net.add_time_point();
    }
    net
}

proptest! {
    #![proptest_config(seeded(1000))]

    #[test]
    fn network_propagation_matches_bellman_ford((n, cs) in networks()) {
        let want = oracle(n, &cs);

        let mut batch = build(n);
        for c in &cs {
            batch.add_difference(PointId(c.a), PointId(c.b), c.lo, c.hi).unwrap();
        }
        let ok = batch.propagate();
        prop_assert_eq!(ok, want.is_some());
        matches_oracle(&batch, n, &want)?;

        let mut full = build(n);
        for c in &cs {
            full.add_difference(PointId(c.a), PointId(c.b), c.lo, c.hi).unwrap();
        }
        full.propagate_full();
        matches_oracle(&full, n, &want)?;

        // One constraint at a time exercises the incremental repair.
        let mut inc = build(n);
        let mut alive = true;
        for c in &cs {
            inc.add_difference(PointId(c.a), PointId(c.b), c.lo, c.hi).unwrap();
            alive = inc.propagate() && alive;
        }
        prop_assert_eq!(alive, want.is_some());
        if alive {
            matches_oracle(&inc, n, &want)?;
        }
    }
}

// ---------------------------------------------------------------------------
// Derived relations against their primitive expansion

fn bound() -> impl Strategy<Value = Bound> {
    (0u64..=20, proptest::option::of(0u64..=20)).prop_map(|(lo, w)| match w {
        Some(w) => Bound::closed(lo, lo + w),
        None => Bound::at_least(lo),
    })
}

fn relation() -> impl Strategy<Value = Relation> {
    (proptest::sample::select(RelationKind::ALL.to_vec()), bound(), bound(), 0u64..=60).prop_map(|(k, b1, b2, t)| {
        let bounds = [b1, b2][..k.arity()].to_vec();
        let anchor = k.is_point().then(|| TimeValue::finite(t));
        Relation::new(k, bounds, anchor).unwrap()
    })
}

fn interval() -> impl Strategy<Value = Interval> {
    (0u64..=40, 0u64..=20).prop_map(|(s, d)| Interval::new(s, s + d))
}

proptest! {
    #![proptest_config(seeded(10_000))]

    #[test]
    fn relation_holds_iff_its_primitives_hold(r in relation(), a in interval(), b in interval()) {
        let prims: Vec<Primitive> = r.expand().unwrap();
        let conj = prims.iter().all(|p| p.holds(a, b));
        prop_assert_eq!(r.holds(a, b), conj, "{} on {:?} {:?}", r, a, b);
    }
}

// ---------------------------------------------------------------------------
// Deadline windows of uncontrollable tokens

proptest! {
    #![proptest_config(seeded(1000))]

    #[test]
    fn uncontrollable_end_window_covers_every_start_and_duration(
        s in bound(), d in bound(), ds in 0u64..=40, dd in 0u64..=40,
    ) {
        let (dur, end) = required_uncontrollable_windows(s, d);
        prop_assert_eq!(dur, d);
        let pick = |b: Bound, x: u64| b.lb.ticks() + b.ub.get().map(|u| x % (u - b.lb.ticks() + 1)).unwrap_or(x);
        let (t, delta) = (pick(s, ds), pick(d, dd));
        prop_assert!(end.contains(t + delta));
        // The window is tight at both ends.
        prop_assert_eq!(end.lb.ticks(), s.lb.ticks() + d.lb.ticks());
        prop_assert_eq!(end.ub.is_infinite(), s.ub.is_infinite() || d.ub.is_infinite());
        if let (Some(su), Some(du)) = (s.ub.get(), d.ub.get()) {
            prop_assert_eq!(end.ub.get(), Some(su + du));
        }
    }
}

// ---------------------------------------------------------------------------
// Plan database: every refinement is undone exactly by its retraction

proptest! {
    #![proptest_config(seeded(64))]

    #[test]
    fn retraction_restores_every_prior_state(picks in proptest::collection::vec((0usize..16, 0usize..16), 1..=50)) {
        let mut db = PlanDatabase::init(&rover()).unwrap();
        let mut states = vec![db.state().clone()];
        for (f, r) in picks {
            let flaws = db.detect_flaws();
            if flaws.is_empty() {
                break;
            }
            let refs = db.refinements(&flaws[f % flaws.len()]);
            if refs.is_empty() {
                break;
            }
            db.apply(&refs[r % refs.len()]).unwrap();
            states.push(db.state().clone());
        }
        while states.len() > 1 {
            states.pop();
            db.retract().unwrap();
            prop_assert!(db.state() == states.last().unwrap());
        }
        prop_assert_eq!(db.journal_len(), 0);
    }
}

// ---------------------------------------------------------------------------
// Dependency graphs stay acyclic and ranks respect every edge

/// `k` planned variables with one value each and synchronizations along `pairs`.
fn domain(k: usize, pairs: &[(usize, usize)]) -> String {
    let mut s = String::from("DOMAIN G\n{\n  TEMPORAL_MODULE tm = [0, 100];\n");
    for v in 0..k {
        s += &format!("  COMP_TYPE StateVariable T{v} (V())\n  {{\n    VALUE V() [1, +INF]\n    MEETS {{\n      V();\n    }}\n  }}\n");
        s += &format!("  COMPONENT c{v} : T{v};\n");
    }
    let mut by_trigger = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for &(a, b) in pairs.iter().filter(|(a, b)| a != b) {
        by_trigger.entry(a).or_default().push(b);
    }
    for (a, targets) in by_trigger {
        s += &format!("  SYNCHRONIZE c{a}\n  {{\n    VALUE V()\n    {{\n");
        for (i, b) in targets.iter().enumerate() {
            s += &format!("      x{i} c{b}.V();\n      DURING [0, +INF] [0, +INF] x{i};\n");
        }
        s += "    }\n  }\n";
    }
    s + "}\n"
}

proptest! {
    #![proptest_config(seeded(200))]

    #[test]
    fn dependency_graph_is_acyclic_and_layered(
        k in 1usize..=6,
        pairs in proptest::collection::vec((0usize..6, 0usize..6), 0..12),
    ) {
        let pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a % k, b % k)).collect();
        let gd = GroundDomain::new(&parse_ddl(&domain(k, &pairs)).unwrap()).unwrap();
        let g = DependencyGraph::build(&gd);
        let levels = g.levels();
        for &(a, b) in &g.edges {
            prop_assert!(levels[a] < levels[b], "edge {}→{} with ranks {:?}", a, b, levels);
        }
        // Every requested dependency is kept or was dropped to break a cycle.
        for &(a, b) in pairs.iter().filter(|(a, b)| a != b) {
            prop_assert!(g.edges.contains(&(a, b)) || g.discarded.contains(&(a, b)));
        }
        prop_assert_eq!(levels.iter().copied().min().unwrap_or(0), 0);
    }
}

// ---------------------------------------------------------------------------
// Rule matching is monotone in the committed relations

fn example13() -> (GroundDomain, Plan) {
    let d = parse_ddl(&fixture("example.ddl")).unwrap();
    (GroundDomain::new(&d).unwrap(), Plan::from_json(&fixture("example13.plan.json")).unwrap())
}

proptest! {
    #![proptest_config(seeded(200))]

    #[test]
    fn extra_relations_never_break_a_satisfied_rule(
        extra in proptest::collection::vec((0usize..64, 0usize..64, relation()), 0..8),
    ) {
        let (gd, mut plan) = example13();
        let refs: Vec<TokenRef> = plan
            .timelines
            .iter()
            .flat_map(|t| (1..=t.tokens.len()).map(move |i| TokenRef::new(&t.variable, i)))
            .collect();
        let before: Vec<bool> = gd.rules.iter().map(|r| check_plan_satisfies_rule(&plan, &gd, r).is_ok()).collect();
        prop_assert!(before.iter().filter(|&&b| b).count() >= 3);
        for (a, b, r) in extra {
            let right = (!r.kind.is_point()).then(|| refs[b % refs.len()].clone());
            plan.relations.push(PlanRelation::new(refs[a % refs.len()].clone(), &r, right));
        }
        for (rule, was) in gd.rules.iter().zip(before) {
            if was {
                prop_assert!(check_plan_satisfies_rule(&plan, &gd, rule).is_ok());
            }
        }
    }

    #[test]
    fn plan_json_round_trip_is_byte_identical(
        extra in proptest::collection::vec((0usize..64, 0usize..64, relation()), 0..8),
    ) {
        let (_, mut plan) = example13();
        let refs: Vec<TokenRef> = plan
            .timelines
            .iter()
            .flat_map(|t| (1..=t.tokens.len()).map(move |i| TokenRef::new(&t.variable, i)))
            .collect();
        for (a, b, r) in extra {
            let right = (!r.kind.is_point()).then(|| refs[b % refs.len()].clone());
            plan.relations.push(PlanRelation::new(refs[a % refs.len()].clone(), &r, right));
        }
        let text = plan.to_json();
        let back = Plan::from_json(&text).unwrap();
        prop_assert_eq!(&back, &plan);
        prop_assert_eq!(back.to_json(), text);
    }
}
