//! Solving and checking plans.
//!
//! [`solve_exact`] runs the bundled branch-and-bound, [`export_mps`] and
//! [`run_external`] hand the model to any MPS-reading MILP solver, and
//! [`validate_solution`] re-checks a plan against the graph without looking
//! at the model's constraint objects.

mod bnb;
mod external;
mod heuristic;
mod mps;
mod oracle;
mod relax;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MilpModel, VarKind};
use crate::scenario::{NodeId, ScenarioGraph};

pub use bnb::solve_exact;
pub use external::{parse_solution_file, run_external, solution_from_assignment, ParsedSolution};
pub use mps::{export_mps, parse_mps, write_mps, MpsColumn, MpsMatrix, MpsNames, RowKind, DEFAULT_NAME_LEN};
pub use oracle::{brute_force_min_donors, ORACLE_MAX_NODES};
pub use validate::{validate_solution, Check, ValidationReport};

/// Version of the plan JSON layout.
pub const SOLUTION_SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleGap,
    Infeasible,
    Timeout,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleGap => "feasible-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
        }
    }

    pub fn has_plan(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Budget of a branch-and-bound run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveLimits {
    pub time_limit_s: f64,
    /// Stop once the relative gap drops to this value.
    pub gap_target: f64,
    pub threads: usize,
    pub seed: u64,
    /// Run the constructive search for a starting plan before branching.
    /// When off, the all-donors point is the only starting incumbent.
    pub primal_heuristic: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            time_limit_s: 600.0,
            gap_target: 0.0,
            threads: 1,
            seed: 1,
            primal_heuristic: true,
        }
    }
}

impl SolveLimits {
    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit_s = seconds;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_primal_heuristic(mut self, on: bool) -> Self {
        self.primal_heuristic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit_s > 0.0) {
            return Err(Error::Parameter("time limit must be positive".into()));
        }
        if !(self.gap_target >= 0.0) {
            return Err(Error::Parameter("gap target must be non-negative".into()));
        }
        Ok(())
    }
}

/// A backhaul plan: donors, active links per edge-set, flows and airtime.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub redundancy: usize,
    /// Donor id mapped to the edge-set whose tree it roots.
    pub donors: BTreeMap<NodeId, usize>,
    /// Active links `(src, dst)` of every edge-set.
    pub active_edges: Vec<BTreeSet<(NodeId, NodeId)>>,
    /// Hop distance of every node present in each edge-set's trees.
    pub depths: Vec<BTreeMap<NodeId, usize>>,
    /// Non-zero flows keyed by `(src, dst, dest, set)`, in Mb/s.
    pub flows: BTreeMap<(NodeId, NodeId, NodeId, usize), f64>,
    /// Non-zero airtime fractions keyed by link.
    pub airtime: BTreeMap<(NodeId, NodeId), f64>,
    pub objective: f64,
    /// Best proven lower bound on the objective.
    pub lower_bound: f64,
    pub gap: f64,
    pub status: SolveStatus,
}

impl Solution {
    /// A solution with no plan, for infeasible or interrupted runs.
    pub fn empty(redundancy: usize, status: SolveStatus) -> Self {
        Self {
            redundancy,
            donors: BTreeMap::new(),
            active_edges: vec![BTreeSet::new(); redundancy],
            depths: vec![BTreeMap::new(); redundancy],
            flows: BTreeMap::new(),
            airtime: BTreeMap::new(),
            objective: f64::NAN,
            lower_bound: f64::NAN,
            gap: f64::NAN,
            status,
        }
    }

    /// Reads a plan out of a full variable assignment of `model`.
    pub fn from_values(model: &MilpModel, values: &[f64]) -> Self {
        let r = model.params().redundancy;
        let mut sol = Solution::empty(r, SolveStatus::Optimal);
        for (var, &x) in model.variables().iter().zip(values) {
            match var.kind {
                VarKind::U { node, level, set } if x > 0.5 => {
                    if level == 0 {
                        sol.donors.insert(node, set);
                    }
                    sol.depths[set].insert(node, level);
                }
                VarKind::P { src, dst, set } if x > 0.5 => {
                    sol.active_edges[set].insert((src, dst));
                }
                VarKind::F { src, dst, dest, set } if x > 1e-9 => {
                    sol.flows.insert((src, dst, dest, set), x);
                }
                VarKind::A { src, dst } if x > 1e-12 => {
                    sol.airtime.insert((src, dst), x.min(1.0));
                }
                _ => {}
            }
        }
        // adding zero turns a -0.0 sum into 0.0
        sol.objective = model.objective_value(values) + 0.0;
        sol.lower_bound = sol.objective;
        sol.gap = 0.0;
        sol
    }

    /// The inverse of [`Solution::from_values`].
    pub fn to_values(&self, model: &MilpModel) -> Vec<f64> {
        model
            .variables()
            .iter()
            .map(|var| match var.kind {
                VarKind::U { node, level, set } => {
                    let on = self.depths.get(set).and_then(|d| d.get(&node)) == Some(&level);
                    f64::from(u8::from(on))
                }
                VarKind::P { src, dst, set } => {
                    let on = self.active_edges.get(set).is_some_and(|e| e.contains(&(src, dst)));
                    f64::from(u8::from(on))
                }
                VarKind::F { src, dst, dest, set } => {
                    self.flows.get(&(src, dst, dest, set)).copied().unwrap_or(0.0)
                }
                VarKind::A { src, dst } => self.airtime.get(&(src, dst)).copied().unwrap_or(0.0),
            })
            .collect()
    }

    pub fn donor_set(&self) -> Vec<NodeId> {
        self.donors.keys().copied().collect()
    }

    pub fn donor_count(&self) -> usize {
        self.donors.len()
    }

    /// Parent of `node` in edge-set `set`.
    pub fn parent(&self, node: NodeId, set: usize) -> Option<NodeId> {
        self.active_edges
            .get(set)?
            .iter()
            .find(|&&(_, d)| d == node)
            .map(|&(s, _)| s)
    }

    /// Total flow carried by a link over all destinations and edge-sets.
    pub fn link_flow(&self, src: NodeId, dst: NodeId) -> f64 {
        self.flows
            .range((src, dst, 0, 0)..=(src, dst, NodeId::MAX, usize::MAX))
            .map(|(_, &v)| v)
            .sum()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&SolutionDoc::from(self)).expect("plan serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: SolutionDoc = serde_path_to_error::deserialize(de)
            .map_err(|err| Error::parse(err.path().to_string(), err.into_inner().to_string()))?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// Fraction of nodes that are donors.
pub fn donor_ratio(solution: &Solution, graph: &ScenarioGraph) -> f64 {
    if graph.is_empty() {
        return 0.0;
    }
    solution.donor_count() as f64 / graph.len() as f64
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    redundancy: usize,
    status: SolveStatus,
    objective: Option<f64>,
    lower_bound: Option<f64>,
    gap: Option<f64>,
    donors: Vec<DonorDoc>,
    sets: Vec<SetDoc>,
    flows: Vec<FlowDoc>,
    airtime: Vec<AirtimeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DonorDoc {
    node: NodeId,
    set: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetDoc {
    edges: Vec<(NodeId, NodeId)>,
    depths: Vec<(NodeId, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    src: NodeId,
    dst: NodeId,
    dest: NodeId,
    set: usize,
    mbps: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AirtimeDoc {
    src: NodeId,
    dst: NodeId,
    fraction: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&Solution> for SolutionDoc {
    fn from(s: &Solution) -> Self {
        // edge-sets are 1-based on the wire
        Self {
            redundancy: s.redundancy,
            status: s.status,
            objective: finite(s.objective),
            lower_bound: finite(s.lower_bound),
            gap: finite(s.gap),
            donors: s
                .donors
                .iter()
                .map(|(&node, &set)| DonorDoc { node, set: set + 1 })
                .collect(),
            sets: s
                .active_edges
                .iter()
                .zip(&s.depths)
                .map(|(e, d)| SetDoc {
                    edges: e.iter().copied().collect(),
                    depths: d.iter().map(|(&n, &l)| (n, l)).collect(),
                })
                .collect(),
            flows: s
                .flows
                .iter()
                .map(|(&(src, dst, dest, set), &mbps)| FlowDoc {
                    src,
                    dst,
                    dest,
                    set: set + 1,
                    mbps,
                })
                .collect(),
            airtime: s
                .airtime
                .iter()
                .map(|(&(src, dst), &fraction)| AirtimeDoc { src, dst, fraction })
                .collect(),
        }
    }
}

impl TryFrom<SolutionDoc> for Solution {
    type Error = Error;

    fn try_from(doc: SolutionDoc) -> Result<Self> {
        let r = doc.redundancy;
        if r == 0 {
            return Err(Error::parse("redundancy", "must be at least 1"));
        }
        if doc.sets.len() != r {
            return Err(Error::parse("sets", format!("expected {r} edge-sets")));
        }
        let set_index = |field: String, set: usize| {
            if (1..=r).contains(&set) {
                Ok(set - 1)
            } else {
                Err(Error::parse(field, format!("edge-set {set} outside 1..={r}")))
            }
        };
        let mut sol = Solution::empty(r, doc.status);
        sol.objective = doc.objective.unwrap_or(f64::NAN);
        sol.lower_bound = doc.lower_bound.unwrap_or(f64::NAN);
        sol.gap = doc.gap.unwrap_or(f64::NAN);
        for (i, d) in doc.donors.into_iter().enumerate() {
            let set = set_index(format!("donors[{i}].set"), d.set)?;
            sol.donors.insert(d.node, set);
        }
        for (k, set) in doc.sets.into_iter().enumerate() {
            sol.active_edges[k] = set.edges.into_iter().collect();
            sol.depths[k] = set.depths.into_iter().collect();
        }
        for (i, f) in doc.flows.into_iter().enumerate() {
            let set = set_index(format!("flows[{i}].set"), f.set)?;
            sol.flows.insert((f.src, f.dst, f.dest, set), f.mbps);
        }
        for a in doc.airtime {
            sol.airtime.insert((a.src, a.dst), a.fraction);
        }
        Ok(sol)
    }
}
