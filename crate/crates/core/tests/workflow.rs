//! A dense 18-node deployment planned end to end.
//!
//! Every pair of sites is linked at 510 Mb/s and every site asks for
//! 100 Mb/s. A donor has at most three children, so one donor feeds at most
//! 1530 Mb/s into its tree. Two trees with one donor each would have to
//! carry 1600 Mb/s apiece, which rules out two donors; three suffice.

use iab_planner::model::{build_model, ModelParams, VarKind};
use iab_planner::resilience::{extract_multitree, inject_failure, reconfigure, verify_recovery};
use iab_planner::scenario::{CandidateEdge, Gnb, Position, ScenarioGraph};
use iab_planner::solve::{donor_ratio, solve_exact, validate_solution, SolveLimits, SolveStatus};

fn dense() -> ScenarioGraph {
    let nodes = (0..18)
        .map(|i| {
            let mut g = Gnb::new(i, Position::new(30.0 * (i % 6) as f64, 30.0 * (i / 6) as f64, 10.0));
            g.demand_mbps = Some(100.0);
            g
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..18 {
        for b in 0..18 {
            if a != b {
                edges.push(CandidateEdge {
                    src: a,
                    dst: b,
                    snr_db: 40.0,
                    capacity_mbps: 510.0,
                });
            }
        }
    }
    ScenarioGraph::new(500.0, 0.04, nodes, edges).unwrap()
}

fn params() -> ModelParams {
    ModelParams::new(3, 4, 2).with_airtime_per_node(false)
}

#[test]
fn dense_graph_has_the_expected_binaries() {
    let model = build_model(&dense(), &params()).unwrap();
    let roots = model
        .variables()
        .iter()
        .filter(|v| matches!(v.kind, VarKind::U { .. }))
        .count();
    assert_eq!(roots, 18 * 4 * 2);
}

#[test]
fn dense_graph_needs_three_donors() {
    let graph = dense();
    let p = params();
    // lower bound: with two donors each tree has a single root
    let per_tree = (graph.len() - 2) as f64 * 100.0;
    assert!(per_tree > p.max_children() as f64 * 510.0);
    let plan = solve_exact(&build_model(&graph, &p).unwrap(), &SolveLimits::default().with_time_limit(20.0)).unwrap();
    assert!(plan.status.has_plan());
    assert_eq!(plan.objective, 3.0, "{}", plan.status);
    if plan.status == SolveStatus::Optimal {
        assert_eq!(plan.lower_bound.ceil(), 3.0);
    }
    let report = validate_solution(&graph, &p, &plan);
    assert!(report.passed(), "{report}");
    assert!((donor_ratio(&plan, &graph) - 0.1667).abs() < 1e-4);

    let topo = extract_multitree(&plan, &graph, &p).unwrap();
    for &link in plan.active_edges.iter().flatten() {
        let mut t = topo.clone();
        let fault = inject_failure(&mut t, link).unwrap();
        reconfigure(&mut t, &fault);
        assert!(verify_recovery(&t, &graph, &p).passed(), "{link:?}");
    }
}
