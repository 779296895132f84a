//! Plans a redundant backhaul on a synthetic deployment and prints the
//! donors, both trees and the validation report.
//!
//! `cargo run --release --example plan_backhaul -- [n] [seed] [R]`

use iab_planner::experiment::ExperimentSpec;
use iab_planner::prelude::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(10, |a| a.parse().expect("n"));
    let seed: u64 = args.next().map_or(3, |a| a.parse().expect("seed"));
    let r: usize = args.next().map_or(2, |a| a.parse().expect("R"));

    let spec = ExperimentSpec::default();
    let graph = spec.scenario(seed, n, 1)?;
    let params = spec.model_params(r);
    let model = build_model(&graph, &params)?;
    println!("{} nodes, {} links, {} variables, {} rows", graph.len(), graph.edges().len(), model.num_vars(), model.constraints().len());

    let plan = solve_exact(&model, &SolveLimits::default().with_time_limit(30.0))?;
    println!("status {}, {} donors (bound {}, gap {:.3})", plan.status.as_str(), plan.objective, plan.lower_bound, plan.gap);
    if !plan.status.has_plan() {
        return Ok(());
    }
    println!("donor ratio {:.3}", donor_ratio(&plan, &graph));
    for (k, edges) in plan.active_edges.iter().enumerate() {
        let roots: Vec<_> = plan.donors.iter().filter(|(_, &s)| s == k).map(|(d, _)| d).collect();
        println!("edge-set {k}: roots {roots:?}");
        for &(p, c) in edges {
            println!(
                "  {p:>2} -> {c:>2}  depth {}  airtime {:.3}  load {:.1} Mb/s",
                plan.depths[k][&c],
                plan.airtime.get(&(p, c)).copied().unwrap_or(0.0),
                plan.link_flow(p, c)
            );
        }
    }
    print!("{}", validate_solution(&graph, &params, &plan));
    Ok(())
}
