//! Compares the branch-and-bound optimum with exhaustive search on small
//! graphs.
//!
//! `cargo run --release --example oracle_check -- [seeds]`

use iab_planner::experiment::ExperimentSpec;
use iab_planner::prelude::*;

fn main() -> Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(5, |a| a.parse().expect("seeds"));
    let spec = ExperimentSpec::default();
    let mut mismatches = 0;
    for n in [5, 6] {
        for seed in 1..=seeds {
            for r in [1, 2] {
                let graph = spec.scenario(seed, n, 1)?;
                let params = spec.model_params(r);
                let (exhaustive, _) = brute_force_min_donors(&graph, &params)?;
                let plan = solve_exact(&build_model(&graph, &params)?, &SolveLimits::default())?;
                let same = plan.objective == exhaustive as f64;
                mismatches += usize::from(!same);
                println!("n={n} seed={seed} R={r}: exhaustive {exhaustive}, solver {} {}", plan.objective, if same { "ok" } else { "MISMATCH" });
            }
        }
    }
    println!("{mismatches} mismatches");
    Ok(())
}
