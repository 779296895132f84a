//! End-to-end runs of the `iab-planner` binary.

use std::path::Path;
use std::process::{Command, Output};

use iab_planner::scenario::load_scenario;
use iab_planner::solve::Solution;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iab-planner"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn version_lists_schemas() {
    let out = run(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("iab-planner "));
    for schema in ["scenario", "solution", "experiment-csv", "trace-csv"] {
        assert!(text.contains(schema), "{schema} missing from {text}");
    }
}

#[test]
fn generate_plan_validate_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = path(dir.path(), "s.json");
    let plan = path(dir.path(), "p.json");
    let mps = path(dir.path(), "p.mps");
    let trace = path(dir.path(), "t.csv");

    let out = run(&[
        "generate", "--n", "10", "--mimo-layers", "2", "--seed", "5", "--coverage-resolution", "4", "--out", &scenario,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let graph = load_scenario(&scenario).unwrap();
    assert!(graph.len() <= 10 && !graph.is_empty());

    let out = run(&[
        "plan", "--input", &scenario, "--R", "2", "--time-limit", "60", "--export-mps", &mps, "--out", &plan,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = Solution::load(&plan).unwrap();
    assert_eq!(sol.redundancy, 2);
    assert!(sol.status.has_plan());
    assert!(std::fs::read_to_string(&mps).unwrap().contains("ENDATA"));

    let out = run(&["validate", "--input", &scenario, "--solution", &plan, "--R", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));

    let out = run(&["simulate", "--input", &scenario, "--solution", &plan, "--R", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = String::from_utf8(out.stdout).unwrap();
    assert_eq!(sweep.lines().count(), sol.active_edges.iter().map(|e| e.len()).sum::<usize>());
    assert!(sweep.lines().all(|l| l.starts_with("ok ")), "{sweep}");

    let &(a, b) = sol.active_edges[0].iter().next().expect("plan has a link");
    let faults = path(dir.path(), "f.json");
    std::fs::write(&faults, format!("[{{\"tick\": 3, \"edge\": [{a}, {b}]}}]")).unwrap();
    let out = run(&[
        "simulate", "--input", &scenario, "--solution", &plan, "--R", "2", "--faults", &faults, "--ticks", "6",
        "--out", &trace,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("tick,node,hops,proxy_rtt_ms,state"));
    assert!(csv.lines().any(|l| l.starts_with(&format!("3,{b},")) && l.ends_with("rerouted")), "{csv}");
}

#[test]
fn same_seed_same_plan() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = path(dir.path(), "s.json");
    assert!(run(&["generate", "--n", "6", "--seed", "9", "--coverage-resolution", "4", "--out", &scenario])
        .status
        .success());
    let plans: Vec<String> = (0..2)
        .map(|i| {
            let p = path(dir.path(), &format!("p{i}.json"));
            assert!(run(&["plan", "--input", &scenario, "--out", &p]).status.success());
            std::fs::read_to_string(p).unwrap()
        })
        .collect();
    assert_eq!(plans[0], plans[1]);
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    std::fs::write(&bad, "{\"nodes\": 3}").unwrap();
    let out = run(&["plan", "--input", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["plan", "--input", &bad, "--flow", "maybe"]).status.code(), Some(2));
    assert_eq!(run(&["plan", "--input", &bad, "--R", "0"]).status.code(), Some(2));
}

#[test]
fn tampered_plan_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = path(dir.path(), "s.json");
    let plan = path(dir.path(), "p.json");
    assert!(run(&["generate", "--n", "6", "--seed", "2", "--coverage-resolution", "4", "--out", &scenario])
        .status
        .success());
    assert!(run(&["plan", "--input", &scenario, "--out", &plan]).status.success());
    let mut sol = Solution::load(&plan).unwrap();
    sol.donors.clear();
    sol.save(&plan).unwrap();
    let out = run(&["validate", "--input", &scenario, "--solution", &plan]);
    assert_eq!(out.status.code(), Some(4));
}
