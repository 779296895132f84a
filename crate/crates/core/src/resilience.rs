//! Runtime multitree state, link failures and subtree re-homing.
//!
//! Each non-donor starts on edge-set 0 and keeps routing over the tree of
//! its active set. A failed link cuts everyone below it in that tree;
//! [`reconfigure`] moves those nodes to a tree whose path to a donor is
//! intact. Nodes stay on the backup tree after recovery.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scenario::{NodeId, ScenarioGraph};
use crate::solve::{validate_solution, Solution};

/// Version of the trace CSV layout.
pub const TRACE_CSV_VERSION: &str = "1";

const LOAD_TOL: f64 = 1e-6;

fn unordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiTreeTopology {
    redundancy: usize,
    donors: BTreeMap<NodeId, usize>,
    /// Per edge-set: child to parent.
    parents: Vec<BTreeMap<NodeId, NodeId>>,
    /// Per edge-set: hop distance to the root at plan time.
    depths: Vec<BTreeMap<NodeId, usize>>,
    active_set: BTreeMap<NodeId, usize>,
    airtime: BTreeMap<(NodeId, NodeId), f64>,
    failed: BTreeSet<(NodeId, NodeId)>,
    unrecoverable: BTreeSet<NodeId>,
    tick: u64,
}

/// Builds the runtime topology of a plan after validating it.
pub fn extract_multitree(solution: &Solution, graph: &ScenarioGraph, params: &ModelParams) -> Result<MultiTreeTopology> {
    let report = validate_solution(graph, params, solution);
    if !report.passed() {
        return Err(Error::Validation(report.to_string()));
    }
    let r = solution.redundancy;
    let mut parents = vec![BTreeMap::new(); r];
    for (k, links) in solution.active_edges.iter().enumerate() {
        for &(p, c) in links {
            parents[k].insert(c, p);
        }
    }
    let mut topo = MultiTreeTopology {
        redundancy: r,
        donors: solution.donors.clone(),
        parents,
        depths: vec![BTreeMap::new(); r],
        active_set: BTreeMap::new(),
        airtime: solution.airtime.clone(),
        failed: BTreeSet::new(),
        unrecoverable: BTreeSet::new(),
        tick: 0,
    };
    for k in 0..r {
        for id in graph.node_ids() {
            if let Some(path) = topo.path(id, k) {
                topo.depths[k].insert(id, path.len());
            }
        }
    }
    for id in graph.node_ids() {
        if !topo.is_donor(id) {
            topo.active_set.insert(id, 0);
        }
    }
    Ok(topo)
}

impl MultiTreeTopology {
    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn donors(&self) -> &BTreeMap<NodeId, usize> {
        &self.donors
    }

    pub fn is_donor(&self, id: NodeId) -> bool {
        self.donors.contains_key(&id)
    }

    pub fn parent(&self, node: NodeId, set: usize) -> Option<NodeId> {
        self.parents.get(set)?.get(&node).copied()
    }

    /// Depth of `node` in edge-set `set` at plan time.
    pub fn planned_depth(&self, node: NodeId, set: usize) -> Option<usize> {
        self.depths.get(set)?.get(&node).copied()
    }

    pub fn active_set(&self, node: NodeId) -> Option<usize> {
        self.active_set.get(&node).copied()
    }

    pub fn failed_links(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.failed
    }

    pub fn unrecoverable(&self) -> &BTreeSet<NodeId> {
        &self.unrecoverable
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn set_tick(&mut self, tick: u64) {
        self.tick = tick;
    }

    /// Links `(parent, child)` from `node` up to the root of edge-set `set`,
    /// ignoring failures. `None` if the node is not in that tree.
    pub fn path(&self, node: NodeId, set: usize) -> Option<Vec<(NodeId, NodeId)>> {
        let mut links = Vec::new();
        let mut cur = node;
        loop {
            if self.donors.get(&cur) == Some(&set) {
                return Some(links);
            }
            let p = self.parent(cur, set)?;
            links.push((p, cur));
            cur = p;
            if links.len() > self.parents[set].len() {
                return None;
            }
        }
    }

    fn path_is_up(&self, path: &[(NodeId, NodeId)]) -> bool {
        path.iter().all(|&(a, b)| !self.failed.contains(&unordered(a, b)))
    }

    /// Current route of `node` to the core, `None` when cut off.
    pub fn route(&self, node: NodeId) -> Option<Vec<(NodeId, NodeId)>> {
        if self.is_donor(node) {
            return Some(Vec::new());
        }
        if self.unrecoverable.contains(&node) {
            return None;
        }
        let path = self.path(node, self.active_set(node)?)?;
        self.path_is_up(&path).then_some(path)
    }

    /// Current hop count to the core.
    pub fn hops(&self, node: NodeId) -> Option<usize> {
        self.route(node).map(|r| r.len())
    }

    /// Donor at the top of `node`'s tree in `set`.
    fn root(&self, node: NodeId, set: usize) -> Option<NodeId> {
        let path = self.path(node, set)?;
        Some(path.last().map_or(node, |&(p, _)| p))
    }

    fn subtree(&self, top: NodeId, set: usize) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::from([top]);
        let mut frontier = vec![top];
        while let Some(n) = frontier.pop() {
            for (&c, &p) in &self.parents[set] {
                if p == n && out.insert(c) {
                    frontier.push(c);
                }
            }
        }
        out
    }
}

/// A link failure seen by the controller.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultEvent {
    /// Failed link as `(parent, child)` in its tree.
    pub edge: (NodeId, NodeId),
    pub set: usize,
    pub tick: u64,
    /// The child's subtree in the failed tree.
    pub affected: BTreeSet<NodeId>,
}

/// Marks a link as failed. Either orientation matches.
///
/// Returns `None`, with a warning, when the link belongs to no tree.
pub fn inject_failure(topo: &mut MultiTreeTopology, edge: (NodeId, NodeId)) -> Option<FaultEvent> {
    let (a, b) = edge;
    let found = (0..topo.redundancy).find_map(|k| {
        if topo.parent(b, k) == Some(a) {
            Some((k, a, b))
        } else if topo.parent(a, k) == Some(b) {
            Some((k, b, a))
        } else {
            None
        }
    });
    let Some((set, parent, child)) = found else {
        log::warn!("link ({a},{b}) is in no tree; failure ignored");
        return None;
    };
    topo.failed.insert(unordered(a, b));
    Some(FaultEvent {
        edge: (parent, child),
        set,
        tick: topo.tick,
        affected: topo.subtree(child, set),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconfigEntry {
    pub node: NodeId,
    pub old_parent: NodeId,
    pub new_parent: NodeId,
    pub new_set: usize,
    pub new_hops: usize,
}

/// Core-network path switch for one node.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingUpdate {
    pub node: NodeId,
    pub old_donor: NodeId,
    pub new_donor: NodeId,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReconfigPlan {
    /// Switches ordered so that a backup parent moves before its children.
    pub entries: Vec<ReconfigEntry>,
    pub routing: Vec<RoutingUpdate>,
    pub unrecoverable: Vec<NodeId>,
}

impl ReconfigPlan {
    pub fn is_complete(&self) -> bool {
        self.unrecoverable.is_empty()
    }
}

/// Moves every node cut off by `fault` onto an intact edge-set and applies
/// the change to `topo`.
pub fn reconfigure(topo: &mut MultiTreeTopology, fault: &FaultEvent) -> ReconfigPlan {
    let mut moves = Vec::new();
    let mut plan = ReconfigPlan::default();
    for &node in &fault.affected {
        if topo.active_set(node) != Some(fault.set) || topo.unrecoverable.contains(&node) {
            continue;
        }
        let backup = (1..topo.redundancy)
            .map(|step| (fault.set + step) % topo.redundancy)
            .find_map(|k| {
                let path = topo.path(node, k)?;
                topo.path_is_up(&path).then_some((k, path.len()))
            });
        match backup {
            Some((k, hops)) => moves.push((hops, node, k)),
            None => plan.unrecoverable.push(node),
        }
    }
    moves.sort();
    for (hops, node, k) in moves {
        let old_parent = topo.parent(node, fault.set).expect("affected nodes hang below the failed link");
        let new_parent = topo.parent(node, k).expect("backup path exists");
        plan.entries.push(ReconfigEntry {
            node,
            old_parent,
            new_parent,
            new_set: k,
            new_hops: hops,
        });
        let old_donor = topo.root(node, fault.set).expect("node is in the failed tree");
        let new_donor = topo.root(node, k).expect("node is in the backup tree");
        if old_donor != new_donor {
            plan.routing.push(RoutingUpdate {
                node,
                old_donor,
                new_donor,
            });
        }
        topo.active_set.insert(node, k);
    }
    topo.unrecoverable.extend(plan.unrecoverable.iter().copied());
    plan
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecoveryReport {
    pub unrecoverable: Vec<NodeId>,
    /// Nodes without an intact route although not marked unrecoverable.
    pub unreachable: Vec<NodeId>,
    pub too_deep: Vec<(NodeId, usize)>,
    /// `(link, load, capacity * airtime)`.
    pub overloaded: Vec<((NodeId, NodeId), f64, f64)>,
    pub routed_over_failed: Vec<NodeId>,
}

impl RecoveryReport {
    pub fn passed(&self) -> bool {
        self.unrecoverable.is_empty()
            && self.unreachable.is_empty()
            && self.too_deep.is_empty()
            && self.overloaded.is_empty()
            && self.routed_over_failed.is_empty()
    }
}

/// Checks reachability, depth and link loads of the current routing.
///
/// Loads are the summed demands routed over each link and must fit within
/// the link's planned airtime share of its capacity. Without flow
/// constraints only the topology is checked.
pub fn verify_recovery(topo: &MultiTreeTopology, graph: &ScenarioGraph, params: &ModelParams) -> RecoveryReport {
    let mut report = RecoveryReport {
        unrecoverable: topo.unrecoverable.iter().copied().collect(),
        ..RecoveryReport::default()
    };
    let mut load: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for node in graph.nodes() {
        let id = node.id;
        if topo.is_donor(id) || topo.unrecoverable.contains(&id) {
            continue;
        }
        let Some(set) = topo.active_set(id) else {
            report.unreachable.push(id);
            continue;
        };
        let Some(path) = topo.path(id, set) else {
            report.unreachable.push(id);
            continue;
        };
        if !topo.path_is_up(&path) {
            report.routed_over_failed.push(id);
            continue;
        }
        if path.len() > params.max_depth {
            report.too_deep.push((id, path.len()));
        }
        for link in path {
            *load.entry(link).or_default() += node.demand_mbps.unwrap_or(0.0);
        }
    }
    if params.flow {
        for (link, l) in load {
            let budget = graph.capacity(link.0, link.1) * topo.airtime.get(&link).copied().unwrap_or(0.0);
            if l > budget + LOAD_TOL * (1.0 + budget) {
                report.overloaded.push((link, l, budget));
            }
        }
    }
    report
}

/// One entry of a fault schedule file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledFault {
    pub tick: u64,
    pub edge: [NodeId; 2],
}

pub fn parse_fault_schedule(text: &str) -> Result<Vec<ScheduledFault>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|err| Error::parse(err.path().to_string(), err.into_inner().to_string()))
}

pub fn load_fault_schedule(path: impl AsRef<Path>) -> Result<Vec<ScheduledFault>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fault_schedule(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceConfig {
    /// One-way latency of a single hop.
    pub hop_latency_ms: f64,
    /// Extra delay per hop for forwarding.
    pub switch_allowance_ms: f64,
    /// Ticks `0..duration_ticks` are logged.
    pub duration_ticks: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            hop_latency_ms: 5.0,
            switch_allowance_ms: 0.0,
            duration_ticks: 40,
        }
    }
}

impl TraceConfig {
    pub fn rtt_ms(&self, hops: usize) -> f64 {
        hops as f64 * (2.0 * self.hop_latency_ms + self.switch_allowance_ms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeState {
    Donor,
    Primary,
    Rerouted,
    Unrecoverable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub tick: u64,
    pub node: NodeId,
    pub hops: Option<usize>,
    pub proxy_rtt_ms: Option<f64>,
    pub state: NodeState,
}

/// Replays `faults` tick by tick. Faults of a tick are detected and
/// repaired before that tick is logged.
pub fn simulate_trace(topo: &MultiTreeTopology, faults: &[ScheduledFault], config: &TraceConfig) -> Vec<TraceRow> {
    let mut topo = topo.clone();
    let mut schedule = faults.to_vec();
    schedule.sort_by_key(|f| f.tick);
    let nodes: Vec<NodeId> = topo
        .donors
        .keys()
        .chain(topo.active_set.keys())
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let start_set: BTreeMap<NodeId, usize> = topo.active_set.clone();
    let mut rows = Vec::with_capacity(nodes.len() * config.duration_ticks as usize);
    let mut next = 0;
    for tick in 0..config.duration_ticks {
        topo.tick = tick;
        while next < schedule.len() && schedule[next].tick <= tick {
            let [a, b] = schedule[next].edge;
            if let Some(event) = inject_failure(&mut topo, (a, b)) {
                let plan = reconfigure(&mut topo, &event);
                log::info!(
                    "tick {tick}: link ({a},{b}) failed, {} nodes moved, {} unrecoverable",
                    plan.entries.len(),
                    plan.unrecoverable.len()
                );
            }
            next += 1;
        }
        for &node in &nodes {
            let hops = topo.hops(node);
            let state = if topo.is_donor(node) {
                NodeState::Donor
            } else if hops.is_none() {
                NodeState::Unrecoverable
            } else if topo.active_set(node) == start_set.get(&node).copied() {
                NodeState::Primary
            } else {
                NodeState::Rerouted
            };
            rows.push(TraceRow {
                tick,
                node,
                hops,
                proxy_rtt_ms: hops.map(|h| config.rtt_ms(h)),
                state,
            });
        }
    }
    rows
}

/// Writes trace rows as `tick,node,hops,proxy_rtt_ms,state`.
pub fn write_trace_csv(rows: &[TraceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::io("<trace csv>", std::io::Error::other(e));
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<trace csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CandidateEdge, Gnb, Position};
    use crate::solve::SolveStatus;

    /// Two donors (0 roots edge-set 1, 3 roots edge-set 2) and two nodes.
    /// Node 2 hangs off donor 0 in edge-set 1 and reaches donor 3 through
    /// node 1 in edge-set 2.
    fn four_node() -> (ScenarioGraph, ModelParams, Solution) {
        let nodes = (0..4)
            .map(|i| {
                let mut g = Gnb::new(i, Position::new(i as f64 * 50.0, 0.0, 10.0));
                g.demand_mbps = Some(100.0);
                g
            })
            .collect();
        let links = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)];
        let edges = links
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .map(|(src, dst)| CandidateEdge {
                src,
                dst,
                snr_db: 30.0,
                capacity_mbps: 500.0,
            })
            .collect();
        let graph = ScenarioGraph::new(1000.0, 1.0, nodes, edges).unwrap();
        let mut s = Solution::empty(2, SolveStatus::Optimal);
        s.donors.insert(0, 0);
        s.donors.insert(3, 1);
        s.active_edges[0].extend([(0, 1), (0, 2)]);
        s.active_edges[1].extend([(3, 1), (1, 2)]);
        s.depths[0].extend([(0, 0), (1, 1), (2, 1)]);
        s.depths[1].extend([(3, 0), (1, 1), (2, 2)]);
        for (src, dst, dest, k) in [(0, 1, 1, 0), (0, 2, 2, 0), (3, 1, 1, 1), (3, 1, 2, 1), (1, 2, 2, 1)] {
            s.flows.insert((src, dst, dest, k), 100.0);
        }
        s.airtime.extend([((0, 1), 0.2), ((0, 2), 0.2), ((3, 1), 0.4), ((1, 2), 0.2)]);
        s.objective = 2.0;
        (graph, ModelParams::new(2, 4, 2), s)
    }

    #[test]
    fn extraction_gives_two_parents() {
        let (g, p, s) = four_node();
        let t = extract_multitree(&s, &g, &p).unwrap();
        for node in [1, 2] {
            assert!(t.parent(node, 0).is_some() && t.parent(node, 1).is_some());
            assert_eq!(t.active_set(node), Some(0));
        }
        assert_eq!(t.planned_depth(2, 1), Some(2));
    }

    #[test]
    fn unvalidated_plan_is_refused() {
        let (g, p, mut s) = four_node();
        s.active_edges[1].insert((0, 2));
        assert!(matches!(extract_multitree(&s, &g, &p), Err(Error::Validation(_))));
    }

    #[test]
    fn primary_failure_moves_node_one_hop_further() {
        let (g, p, s) = four_node();
        let mut t = extract_multitree(&s, &g, &p).unwrap();
        assert_eq!(t.hops(2), Some(1));
        let ev = inject_failure(&mut t, (2, 0)).unwrap();
        assert_eq!(ev.edge, (0, 2));
        assert_eq!(ev.affected, BTreeSet::from([2]));
        assert_eq!(t.hops(2), None);
        let plan = reconfigure(&mut t, &ev);
        assert!(plan.is_complete());
        assert_eq!(plan.entries.len(), 1);
        assert_eq!((plan.entries[0].old_parent, plan.entries[0].new_parent), (0, 1));
        assert_eq!(plan.routing, vec![RoutingUpdate { node: 2, old_donor: 0, new_donor: 3 }]);
        assert_eq!(t.hops(2), Some(2));
        assert!(verify_recovery(&t, &g, &p).passed());
    }

    #[test]
    fn double_fault_is_unrecoverable() {
        let (g, p, s) = four_node();
        let mut t = extract_multitree(&s, &g, &p).unwrap();
        let e1 = inject_failure(&mut t, (1, 2)).unwrap();
        assert!(reconfigure(&mut t, &e1).entries.is_empty());
        let e2 = inject_failure(&mut t, (0, 2)).unwrap();
        let plan = reconfigure(&mut t, &e2);
        assert_eq!(plan.unrecoverable, vec![2]);
        assert!(!verify_recovery(&t, &g, &p).passed());
    }

    #[test]
    fn unknown_link_is_a_no_op() {
        let (g, p, s) = four_node();
        let mut t = extract_multitree(&s, &g, &p).unwrap();
        assert!(inject_failure(&mut t, (2, 3)).is_none());
        assert!(t.failed_links().is_empty());
        assert!(verify_recovery(&t, &g, &p).passed());
    }

    #[test]
    fn trace_rtt_steps_up_after_fault() {
        let (g, p, s) = four_node();
        let t = extract_multitree(&s, &g, &p).unwrap();
        let cfg = TraceConfig::default();
        let faults = parse_fault_schedule(r#"[{"tick": 19, "edge": [0, 2]}]"#).unwrap();
        let rows = simulate_trace(&t, &faults, &cfg);
        let rtt = |tick| rows.iter().find(|r| r.tick == tick && r.node == 2).unwrap().proxy_rtt_ms;
        assert_eq!(rtt(0), Some(10.0));
        assert_eq!(rtt(18), Some(10.0));
        assert_eq!(rtt(19), Some(20.0));
        let quiet = simulate_trace(&t, &[], &cfg);
        assert!(quiet.iter().filter(|r| r.node == 2).all(|r| r.proxy_rtt_ms == Some(10.0)));
        let mut buf = Vec::new();
        write_trace_csv(&rows[..4], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tick,node,hops,proxy_rtt_ms,state\n0,0,0,0.0,donor\n"), "{text}");
    }

    #[test]
    fn schedule_errors_name_the_field() {
        let err = parse_fault_schedule(r#"[{"tick": 1, "edge": [0]}]"#).unwrap_err();
        assert!(err.to_string().contains("[0].edge"), "{err}");
    }
}
