//! Exhaustive minimum-donor search for tiny graphs.
//!
//! Donor subsets are tried by increasing size. For each subset and each way
//! of handing donors to edge-sets, a backtracking search assigns one parent
//! per (node, edge-set) slot. On a fixed tree every unit destined to a node
//! has to cross each link above it, so a tree link `(p, j)` carries at least
//! the summed demand of the subtree under `j`; routing each demand along its
//! tree path meets that bound exactly. Flow feasibility therefore reduces to
//! per-link load, per-node airtime and donor egress checks on subtree sums.
//! This module shares no code with the MILP formulation.

use std::collections::BTreeMap;

use super::{Solution, SolveStatus};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scenario::ScenarioGraph;

/// Largest graph the oracle accepts.
pub const ORACLE_MAX_NODES: usize = 8;

const EPS: f64 = 1e-9;

struct Instance {
    ids: Vec<usize>,
    n: usize,
    r: usize,
    cap: Vec<Vec<Option<f64>>>,
    demand: Vec<f64>,
    max_depth: usize,
    max_children: usize,
    flow: bool,
    airtime: bool,
    donor_cap: f64,
}

struct Search<'a> {
    inst: &'a Instance,
    donor: Vec<Option<usize>>,
    parent: Vec<Vec<Option<usize>>>,
    pair_used: Vec<Vec<bool>>,
    children: Vec<Vec<usize>>,
}

impl Search<'_> {
    /// Checks everything that can already be decided with the current
    /// partial assignment. Every rule is monotone: adding links never fixes a
    /// broken partial plan.
    fn partial_ok(&self) -> bool {
        let inst = self.inst;
        let mut air = vec![0.0; inst.n];
        for k in 0..inst.r {
            let mut load = vec![0.0; inst.n];
            for j in 0..inst.n {
                if self.parent[k][j].is_none() {
                    continue;
                }
                let mut cur = j;
                let mut steps = 0;
                while let Some(p) = self.parent[k][cur] {
                    cur = p;
                    steps += 1;
                    if steps > inst.n {
                        return false;
                    }
                }
                let depth = steps + usize::from(self.donor[cur] != Some(k));
                if depth > inst.max_depth {
                    return false;
                }
                if inst.flow {
                    let mut c = j;
                    while let Some(p) = self.parent[k][c] {
                        load[c] += inst.demand[j];
                        c = p;
                    }
                }
            }
            if !inst.flow {
                continue;
            }
            let mut egress = vec![0.0; inst.n];
            for j in 0..inst.n {
                let Some(p) = self.parent[k][j] else { continue };
                let cap = inst.cap[p][j].expect("parent links exist");
                if load[j] > cap * (1.0 + EPS) + EPS {
                    return false;
                }
                let a = load[j] / cap;
                air[p] += a;
                air[j] += a;
                egress[p] += load[j];
            }
            for i in 0..inst.n {
                if self.donor[i] == Some(k) && egress[i] > inst.donor_cap * (1.0 + EPS) + EPS {
                    return false;
                }
            }
        }
        !(inst.flow && inst.airtime && air.iter().any(|&a| a > 1.0 + EPS))
    }

    fn can_attach(&self, j: usize, k: usize, p: usize) -> bool {
        let inst = self.inst;
        if p == j || inst.cap[p][j].is_none() || self.pair_used[p][j] {
            return false;
        }
        match self.donor[p] {
            Some(dk) if dk != k => return false,
            _ => {}
        }
        self.children[k][p] < inst.max_children
    }

    fn attach(&mut self, j: usize, k: usize, p: usize) {
        self.parent[k][j] = Some(p);
        self.pair_used[p][j] = true;
        self.pair_used[j][p] = true;
        self.children[k][p] += 1;
    }

    fn detach(&mut self, j: usize, k: usize, p: usize) {
        self.parent[k][j] = None;
        self.pair_used[p][j] = false;
        self.pair_used[j][p] = false;
        self.children[k][p] -= 1;
    }

    fn candidates(&mut self, j: usize, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for p in 0..self.inst.n {
            if self.can_attach(j, k, p) {
                self.attach(j, k, p);
                if self.partial_ok() {
                    out.push(p);
                }
                self.detach(j, k, p);
            }
        }
        out
    }

    fn dfs(&mut self, open: &mut Vec<(usize, usize)>) -> bool {
        if open.is_empty() {
            return true;
        }
        // fail-first: the open slot with the fewest admissible parents
        let mut best: Option<(usize, Vec<usize>)> = None;
        for (pos, &(j, k)) in open.iter().enumerate() {
            let cands = self.candidates(j, k);
            if cands.is_empty() {
                return false;
            }
            if best.as_ref().is_none_or(|(_, b)| cands.len() < b.len()) {
                best = Some((pos, cands));
            }
        }
        let (pos, cands) = best.expect("open is non-empty");
        let (j, k) = open.swap_remove(pos);
        for p in cands {
            self.attach(j, k, p);
            if self.dfs(open) {
                return true;
            }
            self.detach(j, k, p);
        }
        open.push((j, k));
        let last = open.len() - 1;
        open.swap(pos, last);
        false
    }

    fn witness(&self) -> Solution {
        let inst = self.inst;
        let mut sol = Solution::empty(inst.r, SolveStatus::Optimal);
        for i in 0..inst.n {
            if let Some(k) = self.donor[i] {
                sol.donors.insert(inst.ids[i], k);
                sol.depths[k].insert(inst.ids[i], 0);
            }
        }
        let mut load: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for k in 0..inst.r {
            for j in 0..inst.n {
                let Some(p) = self.parent[k][j] else { continue };
                sol.active_edges[k].insert((inst.ids[p], inst.ids[j]));
                let mut depth = 0;
                let mut c = j;
                while let Some(q) = self.parent[k][c] {
                    depth += 1;
                    if inst.flow && inst.demand[j] > 0.0 {
                        sol.flows.insert((inst.ids[q], inst.ids[c], inst.ids[j], k), inst.demand[j]);
                        *load.entry((q, c)).or_default() += inst.demand[j];
                    }
                    c = q;
                }
                sol.depths[k].insert(inst.ids[j], depth);
            }
        }
        for ((p, j), l) in load {
            let cap = inst.cap[p][j].expect("tree links exist");
            sol.airtime.insert((inst.ids[p], inst.ids[j]), (l / cap).min(1.0));
        }
        sol.objective = sol.donors.len() as f64;
        sol.lower_bound = sol.objective;
        sol.gap = 0.0;
        sol
    }
}

/// Calls `visit` on every `size`-subset of `0..n` containing `required`, in
/// lexicographic order, until it returns `true`.
fn subsets(n: usize, size: usize, required: &[bool], visit: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn rec(
        start: usize,
        n: usize,
        size: usize,
        required: &[bool],
        chosen: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]) -> bool,
    ) -> bool {
        if chosen.len() == size {
            let complete = required.iter().enumerate().all(|(i, &r)| !r || chosen.contains(&i));
            return complete && visit(chosen);
        }
        for i in start..n {
            chosen.push(i);
            if rec(i + 1, n, size, required, chosen, visit) {
                return true;
            }
            chosen.pop();
            // skipping a required node rules out the rest of this branch
            if required[i] {
                break;
            }
        }
        false
    }
    let mut chosen = Vec::with_capacity(size);
    let needed = required.iter().filter(|&&r| r).count();
    needed <= size && rec(0, n, size, required, &mut chosen, visit)
}

/// Edge-set labels for `m` donors up to relabelling of the sets: donor `t`
/// may only open set `max_so_far + 1`.
fn labelings(m: usize, r: usize, visit: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn rec(m: usize, r: usize, labels: &mut Vec<usize>, used: usize, visit: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if labels.len() == m {
            return visit(labels);
        }
        for k in 0..r.min(used + 1) {
            labels.push(k);
            if rec(m, r, labels, used.max(k + 1), visit) {
                return true;
            }
            labels.pop();
        }
        false
    }
    rec(m, r, &mut Vec::with_capacity(m), 0, visit)
}

/// Minimum donor count of `graph` under `params`, with one optimal plan.
///
/// # Errors
///
/// [`Error::Parameter`] for more than [`ORACLE_MAX_NODES`] nodes, invalid
/// parameters, or flow checks without demands.
pub fn brute_force_min_donors(graph: &ScenarioGraph, params: &ModelParams) -> Result<(usize, Solution)> {
    params.validate()?;
    let n = graph.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::Parameter(format!(
            "brute force is limited to {ORACLE_MAX_NODES} nodes, graph has {n}"
        )));
    }
    if params.flow && !graph.has_demands() {
        return Err(Error::Parameter("flow checks need a demand on every node".into()));
    }
    let ids: Vec<usize> = graph.node_ids().collect();
    let mut cap = vec![vec![None; n]; n];
    for e in graph.edges() {
        let (a, b) = (graph.index_of(e.src).unwrap(), graph.index_of(e.dst).unwrap());
        cap[a][b] = Some(e.capacity_mbps);
    }
    let inst = Instance {
        n,
        r: params.redundancy,
        cap,
        demand: graph.nodes().iter().map(|g| g.demand_mbps.unwrap_or(0.0)).collect(),
        max_depth: params.max_depth,
        max_children: params.max_children(),
        flow: params.flow,
        airtime: params.airtime_per_node,
        donor_cap: params.donor_capacity(graph),
        ids,
    };
    if n == 0 {
        return Ok((0, Solution {
            objective: 0.0,
            lower_bound: 0.0,
            gap: 0.0,
            ..Solution::empty(inst.r, SolveStatus::Optimal)
        }));
    }
    let required: Vec<bool> = graph.nodes().iter().map(|g| g.fixed_donor).collect();

    for size in 1..=n {
        let mut found = None;
        subsets(n, size, &required, &mut |donors| {
            labelings(donors.len(), inst.r, &mut |labels| {
                let mut search = Search {
                    inst: &inst,
                    donor: vec![None; n],
                    parent: vec![vec![None; n]; inst.r],
                    pair_used: vec![vec![false; n]; n],
                    children: vec![vec![0; n]; inst.r],
                };
                for (&d, &k) in donors.iter().zip(labels) {
                    search.donor[d] = Some(k);
                }
                let has_members = donors.len() < n;
                let used_sets = labels.iter().max().map_or(0, |m| m + 1);
                if has_members && used_sets < inst.r {
                    return false;
                }
                let mut open: Vec<(usize, usize)> = (0..n)
                    .filter(|&j| search.donor[j].is_none())
                    .flat_map(|j| (0..inst.r).map(move |k| (j, k)))
                    .collect();
                if search.dfs(&mut open) {
                    found = Some(search.witness());
                    true
                } else {
                    false
                }
            })
        });
        if let Some(sol) = found {
            return Ok((size, sol));
        }
    }
    unreachable!("the all-donor plan is always feasible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CandidateEdge, Gnb, Position};
    use crate::solve::validate_solution;

    fn graph(n: usize, links: &[(usize, usize)], demand: f64, cap: f64) -> ScenarioGraph {
        let nodes = (0..n)
            .map(|i| {
                let mut g = Gnb::new(i, Position::new(i as f64 * 40.0, 0.0, 10.0));
                g.demand_mbps = Some(demand);
                g
            })
            .collect();
        let edges = links
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .map(|(src, dst)| CandidateEdge {
                src,
                dst,
                snr_db: 30.0,
                capacity_mbps: cap,
            })
            .collect();
        ScenarioGraph::new(1000.0, 1.0, nodes, edges).unwrap()
    }

    fn check(g: &ScenarioGraph, p: &ModelParams) -> usize {
        let (count, witness) = brute_force_min_donors(g, p).unwrap();
        assert_eq!(witness.donor_count(), count);
        let report = validate_solution(g, p, &witness);
        assert!(report.passed(), "{report}");
        count
    }

    #[test]
    fn two_nodes() {
        let g = graph(2, &[(0, 1)], 100.0, 750.0);
        assert_eq!(check(&g, &ModelParams::new(1, 4, 1)), 1);
        assert_eq!(check(&g, &ModelParams::new(1, 4, 2)), 2);
    }

    #[test]
    fn ring_of_five() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 100.0, 750.0);
        // delta = 2 allows one child, so each donor feeds a chain of <= 2
        assert_eq!(check(&g, &ModelParams::new(2, 2, 1)), 2);
        assert_eq!(check(&g, &ModelParams::new(2, 3, 1)), 1);
    }

    #[test]
    fn airtime_sharing_costs_a_donor() {
        // a star whose hub must split airtime between three children
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)], 300.0, 750.0);
        let on = ModelParams::new(2, 4, 1);
        assert_eq!(check(&g, &on), 2);
        assert_eq!(check(&g, &on.clone().with_airtime_per_node(false)), 1);
    }

    #[test]
    fn fixed_donor_is_kept() {
        let g = graph(3, &[(0, 1), (1, 2)], 100.0, 750.0)
            .with_fixed_donors(&[2])
            .unwrap();
        let (count, witness) = brute_force_min_donors(&g, &ModelParams::new(3, 4, 1)).unwrap();
        assert_eq!(count, 1);
        assert!(witness.donors.contains_key(&2));
    }

    #[test]
    fn size_guard() {
        let g = graph(9, &[], 1.0, 1.0);
        assert!(matches!(
            brute_force_min_donors(&g, &ModelParams::default()),
            Err(Error::Parameter(_))
        ));
    }
}
