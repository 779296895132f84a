//! Seed sweeps over synthetic scenarios.
//!
//! Every (seed, size) pair goes through placement, coverage sampling,
//! demand estimation, link budgets per MIMO layer count, out-of-range node
//! removal and pruning before each redundancy level is solved.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{populate_edges, McsTable, RadioParams};
use crate::error::{Error, Result};
use crate::model::{build_model, ModelParams};
use crate::scenario::{
    estimate_demand, generate_synthetic_with, prune_edges, remove_isolated, sample_coverage, ScenarioGraph,
    SyntheticConfig,
};
use crate::solve::{solve_exact, SolveLimits};

/// Version of the experiment CSV layout.
pub const EXPERIMENT_CSV_VERSION: &str = "1";

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub seeds: Vec<u64>,
    pub node_counts: Vec<usize>,
    pub density_per_km2: f64,
    pub redundancies: Vec<usize>,
    pub mimo_layers: Vec<u32>,
    pub limits: SolveLimits,
    pub max_depth: usize,
    pub max_out_degree: usize,
    pub airtime_per_node: bool,
    pub coverage_radius_m: f64,
    pub coverage_resolution_m: f64,
    pub synthetic: SyntheticConfig,
    pub radio: RadioParams,
    pub mcs: McsTable,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            seeds: (1..=30).collect(),
            node_counts: vec![15],
            density_per_km2: 45.0,
            redundancies: vec![1, 2],
            mimo_layers: vec![1, 2],
            limits: SolveLimits::default(),
            max_depth: 3,
            max_out_degree: 4,
            airtime_per_node: true,
            coverage_radius_m: 100.0,
            coverage_resolution_m: 1.0,
            synthetic: SyntheticConfig::default(),
            radio: RadioParams::default(),
            mcs: McsTable::nr_256qam(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str| Error::Parameter(format!("experiment needs at least one {name}"));
        if self.seeds.is_empty() {
            return Err(empty("seed"));
        }
        if self.node_counts.is_empty() {
            return Err(empty("node count"));
        }
        if self.redundancies.is_empty() {
            return Err(empty("redundancy level"));
        }
        if self.mimo_layers.is_empty() {
            return Err(empty("MIMO layer count"));
        }
        self.limits.validate()?;
        for &r in &self.redundancies {
            self.model_params(r).validate()?;
        }
        for &l in &self.mimo_layers {
            self.radio.clone().with_mimo_layers(l).validate()?;
        }
        Ok(())
    }

    pub fn model_params(&self, redundancy: usize) -> ModelParams {
        ModelParams::new(self.max_depth, self.max_out_degree, redundancy).with_airtime_per_node(self.airtime_per_node)
    }

    /// The planning graph of one (seed, size, layer count) cell of the sweep.
    pub fn scenario(&self, seed: u64, n: usize, mimo_layers: u32) -> Result<ScenarioGraph> {
        let placed = generate_synthetic_with(&self.synthetic, n, self.density_per_km2, seed)?;
        let grid = sample_coverage(&placed, self.coverage_radius_m, self.coverage_resolution_m)?;
        let demands = estimate_demand(&grid, self.synthetic.lambda_mbps);
        let with_demand = placed.with_demands(&demands)?;
        let radio = self.radio.clone().with_mimo_layers(mimo_layers);
        let linked = populate_edges(&with_demand, &radio, &self.mcs, seed)?;
        // nodes out of range of everyone are dropped; nodes cut off only by
        // pruning stay and end up as donors
        let (in_range, report) = remove_isolated(&linked);
        if !report.removed.is_empty() {
            log::info!(
                "seed {seed}, n {n}, layers {mimo_layers}: dropped out-of-range nodes {:?}",
                report.removed
            );
        }
        prune_edges(&in_range)
    }
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub n: usize,
    pub density: f64,
    #[serde(rename = "R")]
    pub redundancy: usize,
    pub mimo_layers: u32,
    /// Donors over planned nodes; empty when no plan was found.
    pub rho: Option<f64>,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub status: &'static str,
    pub solve_time_s: f64,
}

fn run_cell(spec: &ExperimentSpec, seed: u64, n: usize, layers: u32, r: usize) -> Result<ExperimentRow> {
    let graph = spec.scenario(seed, n, layers)?;
    let model = build_model(&graph, &spec.model_params(r))?;
    let started = Instant::now();
    let sol = solve_exact(&model, &spec.limits)?;
    let solve_time_s = started.elapsed().as_secs_f64();
    let has_plan = sol.status.has_plan();
    Ok(ExperimentRow {
        seed,
        n,
        density: spec.density_per_km2,
        redundancy: r,
        mimo_layers: layers,
        rho: has_plan.then(|| sol.objective / graph.len() as f64),
        objective: has_plan.then_some(sol.objective),
        gap: has_plan.then_some(sol.gap),
        status: sol.status.as_str(),
        solve_time_s,
    })
}

/// Runs the whole sweep on `jobs` threads. Rows come back sorted by
/// (seed, n, R, mimo_layers) whatever the completion order.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<ExperimentRow>> {
    spec.validate()?;
    if jobs == 0 {
        return Err(Error::Parameter("jobs must be at least 1".into()));
    }
    let mut cells = Vec::new();
    for &seed in &spec.seeds {
        for &n in &spec.node_counts {
            for &r in &spec.redundancies {
                for &layers in &spec.mimo_layers {
                    cells.push((seed, n, r, layers));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(seed, n, r, layers)| run_cell(spec, seed, n, layers, r))
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|row| (row.seed, row.n, row.redundancy, row.mimo_layers));
    Ok(rows)
}

pub fn write_experiment_csv(rows: &[ExperimentRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::io("<experiment csv>", std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io("<experiment csv>", e))
}

/// Median of the `rho` column over rows matching `R` and layer count.
pub fn median_rho(rows: &[ExperimentRow], redundancy: usize, mimo_layers: u32) -> Option<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.redundancy == redundancy && r.mimo_layers == mimo_layers)
        .filter_map(|r| r.rho)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            seeds: vec![3, 1, 2],
            node_counts: vec![4],
            coverage_resolution_m: 5.0,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn row_count_and_order() {
        let spec = small();
        let rows = run_experiment(&spec, 2).unwrap();
        assert_eq!(rows.len(), 3 * 2 * 2);
        let keys: Vec<_> = rows.iter().map(|r| (r.seed, r.redundancy, r.mimo_layers)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.status == "optimal"));
    }

    #[test]
    fn csv_header() {
        let rows = run_experiment(&ExperimentSpec { seeds: vec![1], ..small() }, 1).unwrap();
        let mut buf = Vec::new();
        write_experiment_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("seed,n,density,R,mimo_layers,rho,objective,gap,status,solve_time_s\n1,4,45.0,1,1,"));
    }

    #[test]
    fn empty_lists_are_rejected() {
        let spec = ExperimentSpec { seeds: vec![], ..small() };
        assert!(matches!(run_experiment(&spec, 1), Err(Error::Parameter(_))));
        assert!(matches!(run_experiment(&small(), 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn median_of_even_count() {
        let row = |rho| ExperimentRow {
            seed: 0,
            n: 1,
            density: 1.0,
            redundancy: 1,
            mimo_layers: 1,
            rho: Some(rho),
            objective: None,
            gap: None,
            status: "optimal",
            solve_time_s: 0.0,
        };
        let rows = [row(0.2), row(0.8), row(0.4), row(0.6)];
        assert_eq!(median_rho(&rows, 1, 1), Some(0.5));
        assert_eq!(median_rho(&rows, 2, 1), None);
    }
}
