use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn tbp(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tbp"));
    for a in args {
        c.arg(a);
    }
    c.env_remove("TBP_LOG").output().expect("run tbp")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Solves the rover problem into `dir`, returning the plan path.
fn rover_plan(dir: &Path) -> PathBuf {
    let plan = dir.join("plan.json");
    let o = tbp(&[&"solve", &fixture("rover.ddl"), &fixture("rover.pdl"), &"--out", &plan]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    plan
}

fn edit_plan(src: &Path, dst: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(src).unwrap()).unwrap();
    f(&mut v);
    fs::write(dst, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

fn validate(plan: &Path) -> Output {
    tbp(&[&"validate", &plan, &fixture("rover.ddl"), &fixture("rover.pdl")])
}

#[test]
fn check_accepts_the_fixtures() {
    let o = tbp(&[&"check", &fixture("rover.ddl"), &fixture("rover.pdl")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("domain Rover"));
    assert_eq!(code(&tbp(&[&"check", &fixture("example.ddl")])), 0);
}

#[test]
fn syntax_errors_exit_2_with_a_location() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.ddl");
    fs::write(&bad, "DOMAIN D\n{\n  TEMPORAL_MODULE tm = [0, 10]\n}\n").unwrap();
    let o = tbp(&[&"check", &bad]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.ddl:"), "{}", stderr(&o));
}

#[test]
fn semantic_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.ddl");
    let text = fs::read_to_string(fixture("rover.ddl")).unwrap();
    fs::write(&bad, text.replace("COMPONENT Channel : WindowType;", "COMPONENT Channel : NoSuchType;")).unwrap();
    assert_eq!(code(&tbp(&[&"check", &bad])), 3);
}

#[test]
fn missing_input_exits_2() {
    assert_eq!(code(&tbp(&[&"check", &"/no/such/file.ddl"])), 2);
}

#[test]
fn impossible_problem_exits_1_and_tiny_budget_exits_5() {
    let dir = TempDir::new().unwrap();
    let pdl = dir.path().join("late.pdl");
    let text = fs::read_to_string(fixture("rover.pdl")).unwrap();
    // The goal must be over before the rover could possibly have moved.
    fs::write(&pdl, text.replace("AT [0, 35] [22, 65] [1, 45]", "AT [0, 1] [2, 3] [1, 2]")).unwrap();
    let o = tbp(&[&"solve", &fixture("rover.ddl"), &pdl, &"--out", &dir.path().join("p.json")]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = tbp(&[&"solve", &fixture("rover.ddl"), &fixture("rover.pdl"), &"--budget-nodes", &"3"]);
    assert_eq!(code(&o), 5);
}

#[test]
fn solving_twice_gives_identical_plan_and_trace_bytes() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| {
        let (plan, trace) = (dir.path().join(format!("{tag}.json")), dir.path().join(format!("{tag}.jsonl")));
        let o = tbp(&[&"solve", &fixture("rover.ddl"), &fixture("rover.pdl"), &"--out", &plan, &"--trace", &trace]);
        assert_eq!(code(&o), 0);
        (fs::read(plan).unwrap(), fs::read(trace).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    assert!(!a.1.is_empty());
    assert_eq!(a, b);
}

#[test]
fn solved_plan_validates_with_samples() {
    let dir = TempDir::new().unwrap();
    let plan = rover_plan(dir.path());
    let o = tbp(&[&"validate", &plan, &fixture("rover.ddl"), &fixture("rover.pdl"), &"--samples", &"25", &"--seed", &"4"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("25 of 25 valid"));
}

#[test]
fn validate_rejects_a_shortened_horizon() {
    let dir = TempDir::new().unwrap();
    let plan = rover_plan(dir.path());
    let edited = dir.path().join("short.json");
    edit_plan(&plan, &edited, |v| v["horizon"] = 50.into());
    let o = validate(&edited);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}

#[test]
fn validate_rejects_a_dropped_rule_relation() {
    let dir = TempDir::new().unwrap();
    let plan = rover_plan(dir.path());
    let edited = dir.path().join("dropped.json");
    edit_plan(&plan, &edited, |v| {
        let rels = v["relations"].as_array_mut().unwrap();
        let n = rels.len();
        rels.retain(|r| r["kind"] != "contains");
        assert!(rels.len() < n, "rover plans carry a CONTAINS relation");
    });
    let o = validate(&edited);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}

#[test]
fn execute_nominal_overrun_and_abort() {
    let dir = TempDir::new().unwrap();
    let plan = rover_plan(dir.path());
    let nominal = dir.path().join("nominal.json");
    fs::write(&nominal, "{}").unwrap();
    let overrun = dir.path().join("overrun.json");
    fs::write(&overrun, r#"{"durations": [{"timeline": "Instrument", "value": "Sampling", "ticks": 25}]}"#).unwrap();
    let (trace, log) = (dir.path().join("trace.json"), dir.path().join("log.jsonl"));
    let ddl = fixture("rover.ddl");
    let pdl = fixture("rover.pdl");
    let run = |sc: &Path, replans: &str| {
        tbp(&[&"execute", &plan, &sc, &"--ddl", &ddl, &"--pdl", &pdl, &"--max-replans", &replans, &"--out", &trace, &"--log", &log])
    };

    let o = run(&nominal, "0");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&log).unwrap().lines().count() > 10);

    let o = run(&overrun, "1");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stderr(&o).matches("failure ").count(), 1, "{}", stderr(&o));

    let o = run(&overrun, "0");
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("aborted after 1 failure"), "{}", stderr(&o));
    assert!(fs::read_to_string(&log).unwrap().lines().last().unwrap().contains("Sampling"));

    // The failed trace still renders.
    let g = tbp(&[&"gantt", &trace]);
    assert_eq!(code(&g), 0);
}

#[test]
fn gantt_of_example_13_has_eighteen_rows() {
    let o = tbp(&[&"gantt", &fixture("example13.plan.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("timeline,value,start,end,controllability,status"));
    assert_eq!(lines.count(), 18);
}

#[test]
fn gantt_of_an_empty_plan_is_just_the_header() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"domain": "D", "horizon": 10, "timelines": [], "relations": [], "pseudo_controllable": true}"#)
        .unwrap();
    let o = tbp(&[&"gantt", &empty]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "timeline,value,start,end,controllability,status\n");
}

#[test]
fn gantt_rejects_unrelated_json() {
    let dir = TempDir::new().unwrap();
    let junk = dir.path().join("junk.json");
    fs::write(&junk, "[1, 2, 3]").unwrap();
    assert_eq!(code(&tbp(&[&"gantt", &junk])), 2);
}
