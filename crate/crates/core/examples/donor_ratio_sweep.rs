//! A small donor-ratio sweep over seeds, redundancy and MIMO layers.
//!
//! `cargo run --release --example donor_ratio_sweep -- [seeds] [time_limit]`

use iab_planner::experiment::{median_rho, run_experiment, write_experiment_csv, ExperimentSpec};
use iab_planner::prelude::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(4, |a| a.parse().expect("seeds"));
    let limit: f64 = args.next().map_or(5.0, |a| a.parse().expect("time limit"));
    let spec = ExperimentSpec {
        seeds: (1..=seeds).collect(),
        node_counts: vec![12],
        limits: SolveLimits::default().with_time_limit(limit),
        ..ExperimentSpec::default()
    };
    let rows = run_experiment(&spec, 1)?;
    write_experiment_csv(&rows, std::io::stdout())?;
    for r in [1, 2] {
        for layers in [1, 2] {
            if let Some(m) = median_rho(&rows, r, layers) {
                eprintln!("R={r} layers={layers}: median rho {m:.3}");
            }
        }
    }
    Ok(())
}
