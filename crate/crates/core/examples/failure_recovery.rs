//! Fails every active link of a redundant plan one at a time, then replays
//! a fault schedule and prints the per-node trace.
//!
//! `cargo run --release --example failure_recovery -- [seed]`

use iab_planner::experiment::ExperimentSpec;
use iab_planner::prelude::*;
use iab_planner::resilience::{extract_multitree, simulate_trace, write_trace_csv, ScheduledFault, TraceConfig};

fn main() -> Result<()> {
    let spec = ExperimentSpec::default();
    let seed: u64 = std::env::args().nth(1).map_or(5, |a| a.parse().expect("seed"));
    let graph = spec.scenario(seed, 10, 2)?;
    let params = spec.model_params(2);
    let plan = solve_exact(&build_model(&graph, &params)?, &SolveLimits::default().with_time_limit(20.0))?;
    let topo = extract_multitree(&plan, &graph, &params)?;
    println!("{} donors, {:?}", plan.objective, topo.donors());

    for &link in plan.active_edges.iter().flatten() {
        let mut t = topo.clone();
        let Some(fault) = inject_failure(&mut t, link) else { continue };
        let switch = reconfigure(&mut t, &fault);
        let report = verify_recovery(&t, &graph, &params);
        println!(
            "fail {:?} in set {}: {} nodes affected, {} switched, recovered {}",
            fault.edge,
            fault.set,
            fault.affected.len(),
            switch.entries.len(),
            report.passed()
        );
    }

    let first = *plan.active_edges[0].iter().next().expect("plan has links");
    let faults = [ScheduledFault { tick: 5, edge: [first.0, first.1] }];
    let config = TraceConfig { duration_ticks: 10, ..TraceConfig::default() };
    let rows = simulate_trace(&topo, &faults, &config);
    write_trace_csv(&rows, std::io::stdout())
}
