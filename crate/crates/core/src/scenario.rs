//! Deployment graphs: node placement, coverage sampling, demand estimation,
//! edge pruning and the scenario JSON format.
//!
//! A [`ScenarioGraph`] is the annotated directed graph the planner works on.
//! Nodes carry a position and, once estimated, a downstream demand in Mb/s.
//! Edges are candidate backhaul links with an SNR and a capacity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a gNB inside a scenario.
pub type NodeId = usize;

/// Version of the scenario JSON layout.
pub const SCENARIO_SCHEMA_VERSION: &str = "1";

/// Per-gNB nominal load used for synthetic scenarios, in Mb/s.
pub const DEFAULT_LAMBDA_MBPS: f64 = 1000.0;

/// Tolerance used when comparing demands against the nominal load.
const DEMAND_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dz = self.z - other.z;
        (self.horizontal_distance(other).powi(2) + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A base station.
#[derive(Clone, Debug, PartialEq)]
pub struct Gnb {
    pub id: NodeId,
    pub position: Position,
    /// Downstream demand in Mb/s, `None` until estimated.
    pub demand_mbps: Option<f64>,
    /// Brownfield donor: already has a wired connection to the core.
    pub fixed_donor: bool,
}

impl Gnb {
    pub fn new(id: NodeId, position: Position) -> Self {
        Self {
            id,
            position,
            demand_mbps: None,
            fixed_donor: false,
        }
    }

    pub fn demand(&self) -> f64 {
        self.demand_mbps.unwrap_or(0.0)
    }
}

/// A directed candidate backhaul link.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub snr_db: f64,
    pub capacity_mbps: f64,
}

/// Annotated deployment graph.
///
/// Nodes are kept sorted by id and edges by `(src, dst)`, which is also the
/// canonical order of the JSON form.
#[derive(Clone, Debug)]
pub struct ScenarioGraph {
    lambda_mbps: f64,
    area_km2: f64,
    nodes: Vec<Gnb>,
    edges: Vec<CandidateEdge>,
    index: HashMap<NodeId, usize>,
    edge_index: HashMap<(NodeId, NodeId), usize>,
}

impl PartialEq for ScenarioGraph {
    fn eq(&self, other: &Self) -> bool {
        self.lambda_mbps == other.lambda_mbps
            && self.area_km2 == other.area_km2
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

impl ScenarioGraph {
    /// Builds a graph, checking every structural invariant.
    pub fn new(
        lambda_mbps: f64,
        area_km2: f64,
        mut nodes: Vec<Gnb>,
        mut edges: Vec<CandidateEdge>,
    ) -> Result<Self> {
        if !(lambda_mbps.is_finite() && lambda_mbps > 0.0) {
            return Err(Error::parse("lambda_mbps", "must be a positive number"));
        }
        if !(area_km2.is_finite() && area_km2 >= 0.0) {
            return Err(Error::parse("area_km2", "must be a non-negative number"));
        }
        nodes.sort_by_key(|n| n.id);
        edges.sort_by_key(|e| (e.src, e.dst));

        let mut index = HashMap::with_capacity(nodes.len());
        for (pos, node) in nodes.iter().enumerate() {
            if index.insert(node.id, pos).is_some() {
                return Err(Error::parse(
                    format!("nodes[{pos}].id"),
                    format!("duplicate node id {}", node.id),
                ));
            }
            let p = node.position;
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::parse(format!("nodes[{pos}]"), "non-finite position"));
            }
            if let Some(d) = node.demand_mbps {
                if !(d.is_finite() && d >= 0.0 && d <= lambda_mbps + DEMAND_EPS) {
                    return Err(Error::parse(
                        format!("nodes[{pos}].demand_mbps"),
                        format!("demand {d} outside [0, lambda = {lambda_mbps}]"),
                    ));
                }
            }
        }

        let mut edge_index = HashMap::with_capacity(edges.len());
        for (pos, e) in edges.iter().enumerate() {
            if !index.contains_key(&e.src) {
                return Err(Error::parse(
                    format!("edges[{pos}].src"),
                    format!("unknown node {}", e.src),
                ));
            }
            if !index.contains_key(&e.dst) {
                return Err(Error::parse(
                    format!("edges[{pos}].dst"),
                    format!("unknown node {}", e.dst),
                ));
            }
            if e.src == e.dst {
                return Err(Error::parse(format!("edges[{pos}]"), "self-loop"));
            }
            if !(e.capacity_mbps.is_finite() && e.capacity_mbps >= 0.0) {
                return Err(Error::parse(
                    format!("edges[{pos}].capacity_mbps"),
                    "must be a non-negative number",
                ));
            }
            if edge_index.insert((e.src, e.dst), pos).is_some() {
                return Err(Error::parse(
                    format!("edges[{pos}]"),
                    format!("duplicate edge {} -> {}", e.src, e.dst),
                ));
            }
        }

        Ok(Self {
            lambda_mbps,
            area_km2,
            nodes,
            edges,
            index,
            edge_index,
        })
    }

    pub fn lambda_mbps(&self) -> f64 {
        self.lambda_mbps
    }

    pub fn area_km2(&self) -> f64 {
        self.area_km2
    }

    pub fn nodes(&self) -> &[Gnb] {
        &self.nodes
    }

    pub fn edges(&self) -> &[CandidateEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    /// Position of `id` in [`ScenarioGraph::nodes`].
    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&Gnb> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn edge(&self, src: NodeId, dst: NodeId) -> Option<&CandidateEdge> {
        self.edge_index.get(&(src, dst)).map(|&i| &self.edges[i])
    }

    /// Capacity of `src -> dst`, zero when the edge does not exist.
    pub fn capacity(&self, src: NodeId, dst: NodeId) -> f64 {
        self.edge(src, dst).map_or(0.0, |e| e.capacity_mbps)
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &CandidateEdge> + '_ {
        self.edges.iter().filter(move |e| e.dst == id)
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &CandidateEdge> + '_ {
        self.edges.iter().filter(move |e| e.src == id)
    }

    pub fn has_demands(&self) -> bool {
        self.nodes.iter().all(|n| n.demand_mbps.is_some())
    }

    pub fn total_demand(&self) -> f64 {
        self.nodes.iter().map(Gnb::demand).sum()
    }

    pub fn fixed_donors(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.fixed_donor)
            .map(|n| n.id)
            .collect()
    }

    /// Replaces the edge set.
    pub fn with_edges(&self, edges: Vec<CandidateEdge>) -> Result<Self> {
        Self::new(self.lambda_mbps, self.area_km2, self.nodes.clone(), edges)
    }

    /// Sets node demands; nodes missing from `demands` keep their value.
    pub fn with_demands(&self, demands: &BTreeMap<NodeId, f64>) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        for node in &mut nodes {
            if let Some(&d) = demands.get(&node.id) {
                node.demand_mbps = Some(d);
            }
        }
        Self::new(self.lambda_mbps, self.area_km2, nodes, self.edges.clone())
    }

    /// Pins the listed nodes as brownfield donors.
    pub fn with_fixed_donors(&self, ids: &[NodeId]) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        for &id in ids {
            let pos = self
                .index_of(id)
                .ok_or_else(|| Error::Parameter(format!("unknown node {id}")))?;
            nodes[pos].fixed_donor = true;
        }
        Self::new(self.lambda_mbps, self.area_km2, nodes, self.edges.clone())
    }

    /// Multiplies every link capacity by `factor`.
    pub fn scale_capacities(&self, factor: f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| CandidateEdge {
                capacity_mbps: e.capacity_mbps * factor,
                ..e.clone()
            })
            .collect();
        self.with_edges(edges)
    }

    /// Serializes to the canonical scenario JSON.
    pub fn to_json_string(&self) -> String {
        let doc = ScenarioDoc {
            lambda_mbps: self.lambda_mbps,
            area_km2: self.area_km2,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    x: n.position.x,
                    y: n.position.y,
                    z: n.position.z,
                    demand_mbps: n.demand_mbps,
                    fixed_donor: n.fixed_donor,
                })
                .collect(),
            edges: Some(
                self.edges
                    .iter()
                    .map(|e| EdgeDoc {
                        src: e.src,
                        dst: e.dst,
                        snr_db: e.snr_db,
                        capacity_mbps: e.capacity_mbps,
                    })
                    .collect(),
            ),
        };
        serde_json::to_string_pretty(&doc).expect("scenario serialization cannot fail")
    }

    /// Parses scenario JSON, naming the offending field on failure.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|err| {
            let field = err.path().to_string();
            Error::parse(field, err.into_inner().to_string())
        })?;
        let nodes = doc
            .nodes
            .into_iter()
            .map(|n| Gnb {
                id: n.id,
                position: Position::new(n.x, n.y, n.z),
                demand_mbps: n.demand_mbps,
                fixed_donor: n.fixed_donor,
            })
            .collect();
        let edges = doc
            .edges
            .unwrap_or_default()
            .into_iter()
            .map(|e| CandidateEdge {
                src: e.src,
                dst: e.dst,
                snr_db: e.snr_db,
                capacity_mbps: e.capacity_mbps,
            })
            .collect();
        Self::new(doc.lambda_mbps, doc.area_km2, nodes, edges)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    lambda_mbps: f64,
    area_km2: f64,
    nodes: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: NodeId,
    x: f64,
    y: f64,
    z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    demand_mbps: Option<f64>,
    #[serde(default)]
    fixed_donor: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    src: NodeId,
    dst: NodeId,
    snr_db: f64,
    capacity_mbps: f64,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioGraph::from_json_str(&text)
}

pub fn save_scenario(graph: &ScenarioGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, graph.to_json_string() + "\n").map_err(|e| Error::io(path, e))
}

/// Parameters of the synthetic placement.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    /// Antenna height of every node, in meters.
    pub height_m: f64,
    pub lambda_mbps: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            height_m: 10.0,
            lambda_mbps: DEFAULT_LAMBDA_MBPS,
        }
    }
}

/// Places `n` nodes uniformly at random in a square of area `n / density`.
///
/// Edges are left empty; see [`crate::channel::populate_edges`].
pub fn generate_synthetic(n: usize, density_per_km2: f64, seed: u64) -> Result<ScenarioGraph> {
    generate_synthetic_with(&SyntheticConfig::default(), n, density_per_km2, seed)
}

pub fn generate_synthetic_with(
    config: &SyntheticConfig,
    n: usize,
    density_per_km2: f64,
    seed: u64,
) -> Result<ScenarioGraph> {
    if n == 0 {
        return Err(Error::Parameter("node count must be at least 1".into()));
    }
    if !(density_per_km2.is_finite() && density_per_km2 > 0.0) {
        return Err(Error::Parameter(format!(
            "density must be positive, got {density_per_km2}"
        )));
    }
    let area_km2 = n as f64 / density_per_km2;
    let side_m = area_km2.sqrt() * 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..n)
        .map(|id| {
            let x = rng.random::<f64>() * side_m;
            let y = rng.random::<f64>() * side_m;
            Gnb::new(id, Position::new(x, y, config.height_m))
        })
        .collect();
    ScenarioGraph::new(config.lambda_mbps, area_km2, nodes, Vec::new())
}

/// A ground grid cell, keyed by the floor of its coordinates in units of
/// the grid resolution.
pub type Cell = (i64, i64);

/// Sampled ground coverage of every node and the per-cell multiplicity.
#[derive(Clone, Debug)]
pub struct CoverageGrid {
    resolution_m: f64,
    node_ids: Vec<NodeId>,
    coverage: Vec<Vec<Cell>>,
    multiplicity: BTreeMap<Cell, u32>,
}

impl CoverageGrid {
    /// Builds a grid from explicit per-node coverage sets.
    pub fn from_sets(resolution_m: f64, sets: Vec<(NodeId, Vec<Cell>)>) -> Self {
        let mut node_ids = Vec::with_capacity(sets.len());
        let mut coverage = Vec::with_capacity(sets.len());
        let mut multiplicity = BTreeMap::new();
        for (id, cells) in sets {
            let unique: BTreeSet<Cell> = cells.into_iter().collect();
            for &c in &unique {
                *multiplicity.entry(c).or_insert(0) += 1;
            }
            node_ids.push(id);
            coverage.push(unique.into_iter().collect());
        }
        Self {
            resolution_m,
            node_ids,
            coverage,
            multiplicity,
        }
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    /// Covered cells of the node at position `idx` of [`CoverageGrid::node_ids`].
    pub fn cells(&self, idx: usize) -> &[Cell] {
        &self.coverage[idx]
    }

    pub fn cells_of(&self, id: NodeId) -> Option<&[Cell]> {
        let idx = self.node_ids.iter().position(|&n| n == id)?;
        Some(&self.coverage[idx])
    }

    pub fn multiplicity(&self, cell: Cell) -> u32 {
        self.multiplicity.get(&cell).copied().unwrap_or(0)
    }

    pub fn multiplicities(&self) -> &BTreeMap<Cell, u32> {
        &self.multiplicity
    }
}

/// Samples each node's coverage disc on a square grid.
///
/// A cell belongs to a node iff its center lies within `radius_m`
/// (boundary inclusive).
pub fn sample_coverage(
    graph: &ScenarioGraph,
    radius_m: f64,
    resolution_m: f64,
) -> Result<CoverageGrid> {
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius_m}")));
    }
    if !(resolution_m.is_finite() && resolution_m > 0.0) {
        return Err(Error::Parameter(format!(
            "resolution must be positive, got {resolution_m}"
        )));
    }
    let r2 = radius_m * radius_m;
    let sets = graph
        .nodes()
        .iter()
        .map(|node| {
            let (px, py) = (node.position.x, node.position.y);
            let x0 = ((px - radius_m) / resolution_m).floor() as i64 - 1;
            let x1 = ((px + radius_m) / resolution_m).ceil() as i64 + 1;
            let y0 = ((py - radius_m) / resolution_m).floor() as i64 - 1;
            let y1 = ((py + radius_m) / resolution_m).ceil() as i64 + 1;
            let mut cells = Vec::new();
            for cx in x0..=x1 {
                let dx = (cx as f64 + 0.5) * resolution_m - px;
                for cy in y0..=y1 {
                    let dy = (cy as f64 + 0.5) * resolution_m - py;
                    if dx * dx + dy * dy <= r2 {
                        cells.push((cx, cy));
                    }
                }
            }
            (node.id, cells)
        })
        .collect();
    Ok(CoverageGrid::from_sets(resolution_m, sets))
}

/// Shares the nominal load of overlapping cells among the nodes covering
/// them: `d_i = |cells_i| * lambda / sum of multiplicities over cells_i`.
///
/// A node covering no cell keeps the full nominal load.
pub fn estimate_demand(grid: &CoverageGrid, lambda_mbps: f64) -> BTreeMap<NodeId, f64> {
    grid.node_ids
        .iter()
        .zip(&grid.coverage)
        .map(|(&id, cells)| {
            if cells.is_empty() {
                log::warn!("node {id} covers no sampled point; assigning the full load");
                return (id, lambda_mbps);
            }
            let weight: u64 = cells.iter().map(|&c| u64::from(grid.multiplicity(c))).sum();
            (id, cells.len() as f64 * lambda_mbps / weight as f64)
        })
        .collect()
}

/// Drops every edge `i -> j` whose capacity is below the demand of `j`.
pub fn prune_edges(graph: &ScenarioGraph) -> Result<ScenarioGraph> {
    let mut kept = Vec::with_capacity(graph.edges().len());
    for e in graph.edges() {
        let dst = graph.node(e.dst).expect("edge endpoints are validated");
        let demand = dst.demand_mbps.ok_or_else(|| {
            Error::Config(format!("node {} has no demand; estimate demand before pruning", e.dst))
        })?;
        if e.capacity_mbps >= demand {
            kept.push(e.clone());
        }
    }
    graph.with_edges(kept)
}

/// Outcome of [`remove_isolated`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IsolationReport {
    pub removed: Vec<NodeId>,
    /// Demand of the removed nodes, no longer served by the plan.
    pub uncovered_demand_mbps: f64,
}

/// Removes non-donor nodes without any incident edge.
pub fn remove_isolated(graph: &ScenarioGraph) -> (ScenarioGraph, IsolationReport) {
    let mut degree: HashMap<NodeId, usize> = HashMap::new();
    for e in graph.edges() {
        *degree.entry(e.src).or_default() += 1;
        *degree.entry(e.dst).or_default() += 1;
    }
    let mut report = IsolationReport::default();
    let mut nodes = Vec::with_capacity(graph.len());
    for node in graph.nodes() {
        if node.fixed_donor || degree.get(&node.id).copied().unwrap_or(0) > 0 {
            nodes.push(node.clone());
        } else {
            report.removed.push(node.id);
            report.uncovered_demand_mbps += node.demand();
        }
    }
    let kept = ScenarioGraph::new(
        graph.lambda_mbps(),
        graph.area_km2(),
        nodes,
        graph.edges().to_vec(),
    )
    .expect("removing isolated nodes keeps every edge endpoint");
    (kept, report)
}
