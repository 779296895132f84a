//! Builds a planning graph step by step: placement, coverage, demand,
//! links and pruning. Writes the result as scenario JSON.
//!
//! `cargo run --example scenario_pipeline -- [n] [seed] [out.json]`

use iab_planner::prelude::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(12, |a| a.parse().expect("n"));
    let seed: u64 = args.next().map_or(7, |a| a.parse().expect("seed"));
    let out = args.next();

    let placed = generate_synthetic(n, 45.0, seed)?;
    println!("{} sites over {:.3} km2", placed.len(), placed.area_km2());

    let grid = sample_coverage(&placed, 100.0, 2.0)?;
    let demand = estimate_demand(&grid, placed.lambda_mbps());
    for (id, d) in &demand {
        println!("  node {id:>2}: {} cells, {d:>6.1} Mb/s", grid.cells_of(*id).map_or(0, <[_]>::len));
    }

    let linked = populate_edges(&placed.with_demands(&demand)?, &RadioParams::default(), &McsTable::nr_256qam(), seed)?;
    let (connected, isolated) = remove_isolated(&linked);
    let graph = prune_edges(&connected)?;
    println!(
        "{} candidate links, {} after pruning, isolated {:?}",
        linked.edges().len(),
        graph.edges().len(),
        isolated.removed
    );

    match out {
        Some(path) => {
            save_scenario(&graph, &path)?;
            println!("wrote {path}");
        }
        None => println!("{}", graph.to_json_string()),
    }
    Ok(())
}
