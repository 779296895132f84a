//! Plan checking straight from the graph.
//!
//! Nothing here reads the constraint rows of a [`MilpModel`]; every rule is
//! re-derived from the scenario and the parameters so that a bug in model
//! construction cannot hide itself.
//!
//! [`MilpModel`]: crate::model::MilpModel

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::Solution;
use crate::model::ModelParams;
use crate::scenario::{NodeId, ScenarioGraph};

const TOL: f64 = 1e-6;
const MAX_DETAILS: usize = 20;

/// Outcome of one named rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Offending indices, empty when the rule holds.
    pub violations: Vec<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> + '_ {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed() {
                writeln!(f, "ok    {}", c.name)?;
            } else {
                let shown = c.violations.len().min(MAX_DETAILS);
                write!(f, "FAIL  {}: {}", c.name, c.violations[..shown].join("; "))?;
                if c.violations.len() > shown {
                    write!(f, " (+{} more)", c.violations.len() - shown)?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + TOL * (1.0 + rhs.abs())
}

/// Checks a plan against the scenario and the planning parameters.
///
/// Edge-sets are printed 1-based in violation messages.
pub fn validate_solution(graph: &ScenarioGraph, params: &ModelParams, sol: &Solution) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |name: &'static str, violations: Vec<String>| {
        report.checks.push(Check { name, violations });
    };

    let r = params.redundancy;
    let mut plan = Vec::new();
    if !sol.status.has_plan() {
        plan.push(format!("status is {}", sol.status.as_str()));
    }
    if sol.redundancy != r {
        plan.push(format!("plan has {} edge-sets, expected {r}", sol.redundancy));
    }
    if sol.active_edges.len() != sol.redundancy {
        plan.push(format!("{} active-link lists for {} edge-sets", sol.active_edges.len(), sol.redundancy));
    }
    let stop = !plan.is_empty();
    push("plan", plan);
    if stop {
        return report;
    }

    let set_of = |k: usize| k + 1;
    let is_donor = |i: NodeId| sol.donors.contains_key(&i);

    let mut donors = Vec::new();
    for (&i, &k) in &sol.donors {
        if !graph.contains(i) {
            donors.push(format!("donor {i} is not a node"));
        }
        if k >= r {
            donors.push(format!("donor {i} roots edge-set {}", set_of(k)));
        }
    }
    for i in graph.fixed_donors() {
        if !is_donor(i) {
            donors.push(format!("fixed donor {i} is not a donor"));
        }
    }
    if (sol.objective - sol.donors.len() as f64).abs() > TOL {
        donors.push(format!("objective {} but {} donors", sol.objective, sol.donors.len()));
    }
    if !graph.is_empty() && sol.donors.is_empty() {
        donors.push("no donor".to_string());
    }
    push("donors", donors);

    let mut exist = Vec::new();
    for (k, links) in sol.active_edges.iter().enumerate() {
        for &(i, j) in links {
            if graph.edge(i, j).is_none() {
                exist.push(format!("({i},{j}) in edge-set {}", set_of(k)));
            }
        }
    }
    push("edge-existence", exist);

    // parent maps, one per edge-set
    let mut parents: Vec<BTreeMap<NodeId, Vec<NodeId>>> = vec![BTreeMap::new(); r];
    let mut children: Vec<BTreeMap<NodeId, usize>> = vec![BTreeMap::new(); r];
    for (k, links) in sol.active_edges.iter().enumerate() {
        for &(i, j) in links {
            parents[k].entry(j).or_default().push(i);
            *children[k].entry(i).or_default() += 1;
        }
    }

    let mut single = Vec::new();
    let mut role = Vec::new();
    for id in graph.node_ids() {
        for k in 0..r {
            let ps = parents[k].get(&id).map_or(&[][..], Vec::as_slice);
            if is_donor(id) {
                if !ps.is_empty() {
                    single.push(format!("donor {id} has a parent in edge-set {}", set_of(k)));
                }
            } else if ps.len() != 1 {
                single.push(format!("node {id} has {} parents in edge-set {}", ps.len(), set_of(k)));
            }
            for &p in ps {
                if let Some(&pk) = sol.donors.get(&p) {
                    if pk != k {
                        role.push(format!(
                            "donor {p} of edge-set {} is a parent in edge-set {}",
                            set_of(pk),
                            set_of(k)
                        ));
                    }
                }
            }
        }
    }
    push("single-parent", single);
    push("parent-role", role);

    let mut degree = Vec::new();
    for (k, per) in children.iter().enumerate() {
        for (&i, &c) in per {
            if c > params.max_children() {
                degree.push(format!("node {i} has {c} children in edge-set {}", set_of(k)));
            }
        }
    }
    push("out-degree", degree);

    let mut depth = Vec::new();
    for k in 0..r {
        for id in graph.node_ids() {
            if is_donor(id) {
                if sol.donors[&id] == k {
                    if let Some(&d) = sol.depths.get(k).and_then(|m| m.get(&id)) {
                        if d != 0 {
                            depth.push(format!("donor {id} recorded at depth {d}"));
                        }
                    }
                }
                continue;
            }
            let mut hops = 0;
            let mut cur = id;
            let mut seen = BTreeSet::new();
            let reached = loop {
                if sol.donors.get(&cur) == Some(&k) {
                    break true;
                }
                if !seen.insert(cur) {
                    break false;
                }
                match parents[k].get(&cur).and_then(|ps| ps.first()) {
                    Some(&p) => {
                        cur = p;
                        hops += 1;
                    }
                    None => break false,
                }
            };
            if !reached {
                depth.push(format!("node {id} has no path to a donor in edge-set {}", set_of(k)));
            } else if hops > params.max_depth {
                depth.push(format!("node {id} is {hops} hops deep in edge-set {}", set_of(k)));
            } else if let Some(&d) = sol.depths.get(k).and_then(|m| m.get(&id)) {
                if d != hops {
                    depth.push(format!("node {id} recorded at depth {d}, actual {hops}"));
                }
            }
        }
    }
    push("depth", depth);

    let mut disjoint = Vec::new();
    let mut used: BTreeMap<(NodeId, NodeId), Vec<usize>> = BTreeMap::new();
    for (k, links) in sol.active_edges.iter().enumerate() {
        for &(i, j) in links {
            used.entry((i.min(j), i.max(j))).or_default().push(k);
        }
    }
    for ((a, b), sets) in used {
        if sets.len() > 1 {
            let names: Vec<_> = sets.iter().map(|&k| set_of(k).to_string()).collect();
            disjoint.push(format!("link {{{a},{b}}} used {} times (edge-sets {})", sets.len(), names.join(",")));
        }
    }
    push("edge-disjointness", disjoint);

    if params.flow {
        check_flows(graph, params, sol, &mut push);
    }
    report
}

fn check_flows(
    graph: &ScenarioGraph,
    params: &ModelParams,
    sol: &Solution,
    push: &mut impl FnMut(&'static str, Vec<String>),
) {
    let set_of = |k: usize| k + 1;
    let is_donor = |i: NodeId| sol.donors.contains_key(&i);
    let r = params.redundancy;

    let mut sign = Vec::new();
    let mut self_flow = Vec::new();
    let mut gating = Vec::new();
    let mut link_total: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    // per (node, set): out of node, transit into node, delivered to node
    let mut out = BTreeMap::<(NodeId, usize), f64>::new();
    let mut transit_in = BTreeMap::<(NodeId, usize), f64>::new();
    let mut delivered = BTreeMap::<(NodeId, usize), f64>::new();
    for (&(i, j, h, k), &x) in &sol.flows {
        if !(x.is_finite() && x >= -TOL) {
            sign.push(format!("f[{i},{j},{h},{}] = {x}", set_of(k)));
            continue;
        }
        let Some(edge) = graph.edge(i, j) else {
            gating.push(format!("flow on missing link ({i},{j})"));
            continue;
        };
        if h == i && x > TOL {
            self_flow.push(format!("f[{i},{j},{i},{}] = {x}", set_of(k)));
        }
        let active = sol.active_edges.get(k).is_some_and(|s| s.contains(&(i, j)));
        let cap = if active { edge.capacity_mbps } else { 0.0 };
        if !within(x, cap) {
            gating.push(format!("f[{i},{j},{h},{}] = {x} over {cap}", set_of(k)));
        }
        *link_total.entry((i, j)).or_default() += x;
        *out.entry((i, k)).or_default() += x;
        if h == j {
            *delivered.entry((j, k)).or_default() += x;
        } else {
            *transit_in.entry((j, k)).or_default() += x;
        }
    }
    push("flow-sign", sign);
    push("no-self-flow", self_flow);
    push("tree-flow-gating", gating);

    let donor_cap = params.donor_capacity(graph);
    let mut conservation = Vec::new();
    let mut demand = Vec::new();
    for node in graph.nodes() {
        let i = node.id;
        for k in 0..r {
            let o = out.get(&(i, k)).copied().unwrap_or(0.0);
            let t = transit_in.get(&(i, k)).copied().unwrap_or(0.0);
            let allowance = if is_donor(i) { donor_cap } else { 0.0 };
            if !within(o - t, allowance) {
                conservation.push(format!(
                    "node {i} edge-set {}: sends {o:.3} with {t:.3} in transit",
                    set_of(k)
                ));
            }
            if !is_donor(i) {
                let got = delivered.get(&(i, k)).copied().unwrap_or(0.0);
                if !within(node.demand(), got) {
                    demand.push(format!(
                        "node {i} edge-set {}: receives {got:.3} of {:.3}",
                        set_of(k),
                        node.demand()
                    ));
                }
            }
        }
    }
    push("flow-conservation", conservation);
    push("demand", demand);

    let airtime = |i: NodeId, j: NodeId| sol.airtime.get(&(i, j)).copied().unwrap_or(0.0);
    let mut air = Vec::new();
    for (&(i, j), &a) in &sol.airtime {
        let uses = sol.active_edges.iter().filter(|s| s.contains(&(i, j))).count();
        if graph.edge(i, j).is_none() {
            air.push(format!("airtime on missing link ({i},{j})"));
        } else if !(a.is_finite() && a >= -TOL && within(a, 1.0) && within(a, uses as f64)) {
            air.push(format!("a[{i},{j}] = {a} with {uses} tree uses"));
        }
    }
    for (&(i, j), &total) in &link_total {
        let cap = graph.capacity(i, j);
        if !within(total, cap * airtime(i, j)) {
            air.push(format!("link ({i},{j}) carries {total:.3} with airtime {:.4} of {cap}", airtime(i, j)));
        }
    }
    push("link-airtime", air);

    let mut ingress = Vec::new();
    for node in graph.nodes() {
        let j = node.id;
        let carried: f64 = graph.in_edges(j).map(|e| link_total.get(&(e.src, j)).copied().unwrap_or(0.0)).sum();
        let budget: f64 = graph.in_edges(j).map(|e| e.capacity_mbps * airtime(e.src, j)).sum();
        if !within(carried, budget) {
            ingress.push(format!("node {j} takes in {carried:.3} over {budget:.3}"));
        }
    }
    push("node-ingress", ingress);

    if params.airtime_per_node {
        let mut per_node = Vec::new();
        for node in graph.nodes() {
            let v = node.id;
            let total: f64 = sol
                .airtime
                .iter()
                .filter(|((i, j), _)| *i == v || *j == v)
                .map(|(_, &a)| a)
                .sum();
            if !within(total, 1.0) {
                per_node.push(format!("node {v} airtime {total:.4}"));
            }
        }
        push("node-airtime", per_node);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CandidateEdge, Gnb, Position};
    use crate::solve::SolveStatus;

    fn line(n: usize) -> ScenarioGraph {
        let nodes = (0..n)
            .map(|i| {
                let mut g = Gnb::new(i, Position::new(i as f64 * 50.0, 0.0, 10.0));
                g.demand_mbps = Some(100.0);
                g
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n.saturating_sub(1) {
            for (s, d) in [(i, i + 1), (i + 1, i)] {
                edges.push(CandidateEdge {
                    src: s,
                    dst: d,
                    snr_db: 30.0,
                    capacity_mbps: 1000.0,
                });
            }
        }
        ScenarioGraph::new(1000.0, 1.0, nodes, edges).unwrap()
    }

    fn chain_plan() -> Solution {
        // 0 -> 1 -> 2, node 0 is the donor
        let mut s = Solution::empty(1, SolveStatus::Optimal);
        s.donors.insert(0, 0);
        s.active_edges[0].extend([(0, 1), (1, 2)]);
        s.depths[0].extend([(0, 0), (1, 1), (2, 2)]);
        s.flows.insert((0, 1, 1, 0), 100.0);
        s.flows.insert((0, 1, 2, 0), 100.0);
        s.flows.insert((1, 2, 2, 0), 100.0);
        s.airtime.insert((0, 1), 0.2);
        s.airtime.insert((1, 2), 0.1);
        s.objective = 1.0;
        s
    }

    #[test]
    fn chain_plan_is_valid() {
        let report = validate_solution(&line(3), &ModelParams::new(3, 4, 1), &chain_plan());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn too_deep_is_reported() {
        let report = validate_solution(&line(3), &ModelParams::new(1, 4, 1), &chain_plan());
        let check = report.check("depth").unwrap();
        assert!(!check.passed());
        assert!(check.violations[0].contains("node 2"));
    }

    #[test]
    fn missing_delivery_is_reported() {
        let mut s = chain_plan();
        s.flows.remove(&(1, 2, 2, 0));
        let report = validate_solution(&line(3), &ModelParams::new(3, 4, 1), &s);
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert_eq!(failed, ["demand"]);
        assert!(report.check("demand").unwrap().violations[0].contains("node 2"));
    }

    #[test]
    fn low_airtime_is_reported() {
        let mut s = chain_plan();
        s.airtime.insert((0, 1), 0.1);
        let report = validate_solution(&line(3), &ModelParams::new(3, 4, 1), &s);
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert_eq!(failed, ["link-airtime", "node-ingress"]);
    }

    #[test]
    fn reused_link_is_reported() {
        let g = line(2);
        let mut s = Solution::empty(2, SolveStatus::Optimal);
        s.donors.insert(0, 0);
        s.active_edges[0].insert((0, 1));
        s.active_edges[1].insert((0, 1));
        s.objective = 1.0;
        let p = ModelParams::new(3, 4, 2).with_flow(false);
        let report = validate_solution(&g, &p, &s);
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&"edge-disjointness"));
        assert!(failed.contains(&"parent-role"));
    }

    #[test]
    fn empty_plan_stops_early() {
        let report = validate_solution(&line(2), &ModelParams::default(), &Solution::empty(1, SolveStatus::Infeasible));
        assert_eq!(report.checks.len(), 1);
        assert!(!report.passed());
    }
}
