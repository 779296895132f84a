//! Exports a model as MPS and, when `python3` with `highspy` is present,
//! solves it through the bundled adapter script.
//!
//! `cargo run --example external_solver -- [out.mps]`

use iab_planner::experiment::ExperimentSpec;
use iab_planner::prelude::*;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "plan.mps".into());
    let spec = ExperimentSpec::default();
    let graph = spec.scenario(11, 6, 1)?;
    let model = build_model(&graph, &spec.model_params(2))?;

    let names = export_mps(&model, &out)?;
    println!("wrote {out} ({} columns)", model.num_vars());
    let sample = model.var(iab_planner::model::VarKind::U { node: graph.nodes()[0].id, level: 0, set: 0 });
    if let Some(v) = sample {
        println!("root indicator of node {} in edge-set 0 is column {}", graph.nodes()[0].id, names.columns[v.0]);
    }

    let adapter = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/highs_adapter.py");
    let cmd = format!("python3 {adapter} {{mps}} {{sol}} --time-limit {{time_limit}} --threads {{threads}} --seed {{seed}}");
    let limits = SolveLimits::default().with_time_limit(60.0);
    match run_external(&model, &cmd, &limits) {
        Ok(ext) => {
            let native = solve_exact(&model, &limits)?;
            println!("external: {} donors ({}), native: {} donors", ext.objective, ext.status.as_str(), native.objective);
        }
        Err(e) => println!("external solver unavailable: {e}"),
    }
    Ok(())
}
