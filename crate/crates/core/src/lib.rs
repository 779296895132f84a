//! Donor-minimizing planning for Integrated Access and Backhaul networks.
//!
//! The pipeline runs from a scenario ([`scenario`]) through link budgets
//! ([`channel`]) into a mixed-integer model ([`model`]) that is solved and
//! checked by [`solve`]. [`resilience`] replays link failures against a
//! redundant plan and [`experiment`] sweeps seeds and configurations.
//!
//! ```no_run
//! use iab_planner::prelude::*;
//!
//! let graph = load_scenario("scenario.json")?;
//! let params = ModelParams::new(3, 4, 2);
//! let model = build_model(&graph, &params)?;
//! let plan = solve_exact(&model, &SolveLimits::default())?;
//! assert!(validate_solution(&graph, &params, &plan).passed());
//! # Ok::<(), iab_planner::Error>(())
//! ```

pub mod channel;
pub mod error;
pub mod experiment;
pub mod model;
pub mod resilience;
pub mod scenario;
pub mod solve;

pub use error::{Error, Result};

/// Version strings of every on-disk format.
pub fn schema_versions() -> Vec<(&'static str, &'static str)> {
    vec![
        ("scenario", scenario::SCENARIO_SCHEMA_VERSION),
        ("solution", solve::SOLUTION_SCHEMA_VERSION),
        ("experiment-csv", experiment::EXPERIMENT_CSV_VERSION),
        ("trace-csv", resilience::TRACE_CSV_VERSION),
    ]
}

pub mod prelude {
    pub use crate::channel::{
        link_capacity_mbps, pathloss_db, populate_edges, select_mcs, McsRow, McsTable, RadioParams,
    };
    pub use crate::model::{build_model, MilpModel, ModelParams};
    pub use crate::resilience::{inject_failure, reconfigure, verify_recovery, MultiTreeTopology};
    pub use crate::scenario::{
        estimate_demand, generate_synthetic, load_scenario, prune_edges, remove_isolated, sample_coverage,
        save_scenario, ScenarioGraph,
    };
    pub use crate::solve::{
        brute_force_min_donors, donor_ratio, export_mps, run_external, solve_exact, validate_solution, Solution,
        SolveLimits, SolveStatus,
    };
    pub use crate::{Error, Result};
}
