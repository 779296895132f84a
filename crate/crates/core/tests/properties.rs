//! Property tests over small random deployments.

use iab_planner::model::{build_model, ModelParams};
use iab_planner::resilience::{extract_multitree, inject_failure, reconfigure, verify_recovery};
use iab_planner::scenario::{CandidateEdge, Gnb, Position, ScenarioGraph};
use iab_planner::solve::{
    brute_force_min_donors, parse_mps, solve_exact, validate_solution, write_mps, MpsMatrix, SolveLimits, SolveStatus,
    DEFAULT_NAME_LEN,
};
use proptest::prelude::*;

/// Up to five nodes with random demands. Each unordered pair is either
/// missing or a symmetric link with a random capacity.
fn small_graph() -> impl Strategy<Value = ScenarioGraph> {
    (3usize..=5)
        .prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            (
                prop::collection::vec(10.0f64..250.0, n),
                prop::collection::vec(prop::option::weighted(0.75, 80.0f64..800.0), pairs),
            )
        })
        .prop_map(|(demands, links)| {
            let n = demands.len();
            let nodes = demands
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let mut g = Gnb::new(i, Position::new(40.0 * i as f64, 15.0 * (i % 2) as f64, 10.0));
                    g.demand_mbps = Some(d.round());
                    g
                })
                .collect();
            let mut edges = Vec::new();
            let mut next = links.iter();
            for a in 0..n {
                for b in a + 1..n {
                    if let Some(Some(cap)) = next.next() {
                        for (src, dst) in [(a, b), (b, a)] {
                            edges.push(CandidateEdge {
                                src,
                                dst,
                                snr_db: 20.0,
                                capacity_mbps: cap.round(),
                            });
                        }
                    }
                }
            }
            ScenarioGraph::new(500.0, 0.2, nodes, edges).unwrap()
        })
}

fn params(r: usize) -> ModelParams {
    ModelParams::new(3, 4, r)
}

fn optimum(graph: &ScenarioGraph, p: &ModelParams) -> f64 {
    let sol = solve_exact(&build_model(graph, p).unwrap(), &SolveLimits::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.objective
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_json_round_trips(g in small_graph()) {
        let back = ScenarioGraph::from_json_str(&g.to_json_string()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn mps_text_round_trips(g in small_graph(), r in 1usize..=2) {
        let model = build_model(&g, &params(r)).unwrap();
        let mut text = Vec::new();
        let names = write_mps(&model, &mut text, DEFAULT_NAME_LEN).unwrap();
        let parsed = parse_mps(std::str::from_utf8(&text).unwrap()).unwrap();
        prop_assert_eq!(parsed, MpsMatrix::from_model(&model, &names));
    }

    #[test]
    fn native_matches_exhaustive(g in small_graph(), r in 1usize..=2) {
        let p = params(r);
        let (count, witness) = brute_force_min_donors(&g, &p).unwrap();
        prop_assert!(validate_solution(&g, &p, &witness).passed());
        let sol = solve_exact(&build_model(&g, &p).unwrap(), &SolveLimits::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert_eq!(sol.objective, count as f64);
        let report = validate_solution(&g, &p, &sol);
        prop_assert!(report.passed(), "{}", report);
    }

    #[test]
    fn more_trees_never_need_fewer_donors(g in small_graph()) {
        prop_assert!(optimum(&g, &params(2)) >= optimum(&g, &params(1)));
    }

    #[test]
    fn more_capacity_never_needs_more_donors(g in small_graph(), r in 1usize..=2) {
        let wide = g.scale_capacities(2.0).unwrap();
        prop_assert!(optimum(&wide, &params(r)) <= optimum(&g, &params(r)));
    }

    #[test]
    fn every_single_failure_is_recovered(g in small_graph()) {
        let p = params(2);
        let sol = solve_exact(&build_model(&g, &p).unwrap(), &SolveLimits::default()).unwrap();
        let topo = extract_multitree(&sol, &g, &p).unwrap();
        for &link in sol.active_edges.iter().flatten() {
            let mut t = topo.clone();
            let fault = inject_failure(&mut t, link).unwrap();
            let plan = reconfigure(&mut t, &fault);
            prop_assert!(plan.is_complete());
            let report = verify_recovery(&t, &g, &p);
            prop_assert!(report.passed(), "{:?} {:?}", link, report);
        }
    }

    #[test]
    fn interrupted_bounds_bracket_the_optimum(g in small_graph(), r in 1usize..=2) {
        let p = params(r);
        let (count, _) = brute_force_min_donors(&g, &p).unwrap();
        let limits = SolveLimits::default().with_time_limit(0.01).with_primal_heuristic(false);
        let sol = solve_exact(&build_model(&g, &p).unwrap(), &limits).unwrap();
        if sol.status.has_plan() {
            prop_assert!(sol.lower_bound <= count as f64 + 1e-9);
            prop_assert!(sol.objective >= count as f64);
            prop_assert!(sol.gap >= 0.0);
            prop_assert!(validate_solution(&g, &p, &sol).passed());
        }
    }
}
