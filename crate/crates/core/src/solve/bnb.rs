//! Branch-and-bound over the binary variables with LP relaxation bounds.
//!
//! Search order: depth-first dive from the current node, then restart from
//! the open node with the best bound. Branching picks the most fractional
//! binary, ties going to the lowest variable index. The all-donors point
//! and a constructive plan seed the incumbent.
//!
//! Children re-optimize their parent's LP with one more variable fixed.
//! When the simplex breaks down numerically the node is rebuilt from
//! scratch, and if that fails too the node is split on its first free
//! binary with the parent's bound carried over, so a failed LP never cuts
//! off part of the search space.

use std::rc::Rc;
use std::time::{Duration, Instant};

use super::heuristic::constructive_plan;
use super::relax::{Layout, Relaxation};
use super::{Solution, SolveLimits, SolveStatus};
use crate::error::Result;
use crate::model::{MilpModel, VarKind};

const INTEGRALITY_TOL: f64 = 1e-6;
const FEASIBILITY_TOL: f64 = 1e-6;

/// A solved node LP together with the column layout it was built with.
#[derive(Clone)]
struct NodeLp {
    sol: microlp::Solution,
    layout: Rc<Layout>,
}

enum Lp {
    Solved(NodeLp),
    Infeasible,
    OutOfTime,
    Failed,
}

fn lp_outcome(res: std::result::Result<microlp::SolveOutcome, microlp::Error>, layout: Rc<Layout>) -> Lp {
    match res {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => Lp::Solved(NodeLp { sol, layout }),
            Err(_) => Lp::OutOfTime,
        },
        Err(microlp::Error::Infeasible) => Lp::Infeasible,
        Err(e) => {
            log::debug!("LP failed: {e}");
            Lp::Failed
        }
    }
}

fn cold_solve(relax: &Relaxation, fixings: &[(usize, f64)], deadline: Instant) -> Lp {
    let Some((mut problem, layout)) = relax.build(fixings) else {
        return Lp::Infeasible;
    };
    problem.set_time_limit(deadline.saturating_duration_since(Instant::now()));
    lp_outcome(problem.solve(), Rc::new(layout))
}

/// Solves a node whose newest fixing is the last entry of `fixings`,
/// warm-starting from `parent` when there is one.
fn node_lp(relax: &Relaxation, parent: Option<NodeLp>, fixings: &[(usize, f64)], deadline: Instant) -> Lp {
    if let (Some(p), Some(&(var, value))) = (parent, fixings.last()) {
        if let Some(col) = p.layout.column(var) {
            match lp_outcome(p.sol.fix_var(col, value), p.layout) {
                Lp::Failed => log::debug!("warm start failed, rebuilding"),
                other => return other,
            }
        }
    }
    cold_solve(relax, fixings, deadline)
}

/// Replaces the flows and airtimes of `x` (binaries already rounded) with
/// each node's demand routed along its own tree path.
pub(super) fn route_on_trees(model: &MilpModel, x: &mut [f64]) {
    let graph = model.graph();
    let r = model.params().redundancy;
    let mut parent: Vec<std::collections::HashMap<usize, usize>> = vec![Default::default(); r];
    for (i, var) in model.variables().iter().enumerate() {
        match var.kind {
            VarKind::P { src, dst, set } if x[i] > 0.5 => {
                parent[set].insert(dst, src);
            }
            VarKind::F { .. } | VarKind::A { .. } => x[i] = 0.0,
            _ => {}
        }
    }
    if !model.params().flow {
        return;
    }
    let mut load: std::collections::HashMap<(usize, usize), f64> = Default::default();
    for (k, tree) in parent.iter().enumerate() {
        for &h in tree.keys() {
            let d = graph.node(h).map_or(0.0, |g| g.demand());
            let mut c = h;
            let mut steps = 0;
            while let Some(&p) = tree.get(&c) {
                if let Some(v) = model.var(VarKind::F { src: p, dst: c, dest: h, set: k }) {
                    x[v.0] += d;
                }
                *load.entry((p, c)).or_default() += d;
                c = p;
                steps += 1;
                if steps > graph.len() {
                    break;
                }
            }
        }
    }
    for ((p, c), l) in load {
        let (Some(v), Some(e)) = (model.var(VarKind::A { src: p, dst: c }), graph.edge(p, c)) else {
            continue;
        };
        x[v.0] = (l / e.capacity_mbps).min(1.0);
    }
}

struct OpenNode {
    bound: f64,
    depth: usize,
    seq: u64,
    parent: Option<Rc<NodeLp>>,
    /// All fixings of this node, the newest last.
    fixings: Vec<(usize, f64)>,
}

struct Search<'a> {
    model: &'a MilpModel,
    relax: Relaxation,
    integral_objective: bool,
    incumbent: Option<(f64, Vec<f64>)>,
    open: Vec<OpenNode>,
    seq: u64,
    nodes: u64,
}

impl Search<'_> {
    /// Bound below which a node can still improve on the incumbent.
    fn can_improve(&self, bound: f64) -> bool {
        let Some((best, _)) = &self.incumbent else {
            return true;
        };
        if self.integral_objective {
            (bound - INTEGRALITY_TOL).ceil() < best - 0.5
        } else {
            bound < best - FEASIBILITY_TOL * (1.0 + best.abs())
        }
    }

    /// Most fractional binary, lowest index first on ties.
    fn branching_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &i in self.relax.binaries() {
            let frac = (x[i] - x[i].floor()).min(x[i].ceil() - x[i]);
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
                best = Some((i, frac));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Lowest-index binary not yet fixed.
    fn first_free(&self, fixings: &[(usize, f64)]) -> Option<usize> {
        self.relax
            .binaries()
            .iter()
            .copied()
            .find(|i| !fixings.iter().any(|(v, _)| v == i))
    }

    /// Rounds the binaries of `x`, reroutes its flows on the trees and keeps
    /// it if it is feasible and better than the incumbent.
    fn offer_incumbent(&mut self, mut x: Vec<f64>) {
        for &i in self.relax.binaries() {
            x[i] = x[i].round();
        }
        route_on_trees(self.model, &mut x);
        let violations = self.model.violations(&x, FEASIBILITY_TOL);
        if !violations.is_empty() {
            log::debug!("discarding integral point: {}", violations.join("; "));
            return;
        }
        let obj = self.model.objective_value(&x);
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best - 1e-9) {
            log::debug!("incumbent {obj} after {} nodes", self.nodes);
            self.incumbent = Some((obj, x));
        }
    }

    /// Point with every binary fixed as in `fixings`.
    fn fixed_point(&self, fixings: &[(usize, f64)]) -> Vec<f64> {
        let mut x = vec![0.0; self.model.num_vars()];
        for &(v, val) in fixings {
            x[v] = val;
        }
        x
    }

    fn global_bound(&self, current: Option<f64>) -> f64 {
        let mut lb = self.open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        if let Some(c) = current {
            lb = lb.min(c);
        }
        if let Some((best, _)) = &self.incumbent {
            lb = lb.min(*best);
        }
        if self.integral_objective && lb.is_finite() {
            lb = (lb - INTEGRALITY_TOL).ceil();
        }
        lb
    }

    fn pop_best(&mut self) -> Option<OpenNode> {
        let idx = (0..self.open.len()).min_by(|&a, &b| {
            let (na, nb) = (&self.open[a], &self.open[b]);
            na.bound
                .total_cmp(&nb.bound)
                .then(nb.depth.cmp(&na.depth))
                .then(nb.seq.cmp(&na.seq))
        })?;
        Some(self.open.swap_remove(idx))
    }

    fn push(&mut self, bound: f64, depth: usize, parent: Option<Rc<NodeLp>>, fixings: Vec<(usize, f64)>) {
        self.seq += 1;
        self.open.push(OpenNode {
            bound,
            depth,
            seq: self.seq,
            parent,
            fixings,
        });
    }
}

fn gap(objective: f64, lower_bound: f64) -> f64 {
    if objective.abs() < 1e-12 {
        0.0
    } else {
        ((objective - lower_bound) / objective.abs()).max(0.0)
    }
}

fn with_fixing(fixings: &[(usize, f64)], var: usize, value: f64) -> Vec<(usize, f64)> {
    let mut f = Vec::with_capacity(fixings.len() + 1);
    f.extend_from_slice(fixings);
    f.push((var, value));
    f
}

/// Solves `model` to proven optimality or until a limit fires.
///
/// Single-threaded and deterministic for a fixed `limits.seed`, which only
/// drives the constructive starting plan; `limits.threads` is ignored.
pub fn solve_exact(model: &MilpModel, limits: &SolveLimits) -> Result<Solution> {
    limits.validate()?;
    let started = Instant::now();
    let deadline = started + Duration::from_secs_f64(limits.time_limit_s);
    let r = model.params().redundancy;

    let mut search = Search {
        model,
        relax: Relaxation::new(model),
        integral_objective: model.objective_is_integral(),
        incumbent: None,
        open: Vec::new(),
        seq: 0,
        nodes: 0,
    };
    let start = model.all_donors_point();
    if model.violations(&start, FEASIBILITY_TOL).is_empty() {
        search.incumbent = Some((model.objective_value(&start), start));
    }
    if limits.primal_heuristic {
        if let Some(x) = constructive_plan(model, limits.seed) {
            search.offer_incumbent(x);
        }
    }

    // the node being dived on
    let mut current: Option<(Lp, f64, usize, Vec<(usize, f64)>)> =
        Some((cold_solve(&search.relax, &[], deadline), f64::NEG_INFINITY, 0, Vec::new()));
    let mut timed_out = false;
    loop {
        let (lp, inherited, depth, fixings) = match current.take() {
            Some(c) => c,
            None => {
                let Some(node) = search.pop_best() else { break };
                if !search.can_improve(node.bound) {
                    continue;
                }
                if Instant::now() >= deadline {
                    search.open.push(node);
                    timed_out = true;
                    break;
                }
                let parent = node.parent.map(|rc| Rc::try_unwrap(rc).unwrap_or_else(|rc| (*rc).clone()));
                let lp = node_lp(&search.relax, parent, &node.fixings, deadline);
                (lp, node.bound, node.depth, node.fixings)
            }
        };
        search.nodes += 1;
        let node = match lp {
            Lp::Solved(node) => node,
            Lp::Infeasible => continue,
            Lp::OutOfTime => {
                search.push(inherited, depth, None, fixings);
                timed_out = true;
                break;
            }
            Lp::Failed => {
                match search.first_free(&fixings) {
                    Some(var) => {
                        for value in [1.0, 0.0] {
                            search.push(inherited, depth + 1, None, with_fixing(&fixings, var, value));
                        }
                    }
                    None => {
                        let x = search.fixed_point(&fixings);
                        search.offer_incumbent(x);
                    }
                }
                continue;
            }
        };
        let x = node.layout.values(&node.sol);
        let bound = model.objective_value(&x).max(inherited);
        if depth == 0 {
            log::debug!("root bound {bound:.4}");
        }
        if !search.can_improve(bound) {
            continue;
        }
        let Some(var) = search.branching_var(&x) else {
            search.offer_incumbent(x);
            continue;
        };
        if limits.gap_target > 0.0 {
            if let Some((best, _)) = &search.incumbent {
                if gap(*best, search.global_bound(Some(bound))) <= limits.gap_target {
                    break;
                }
            }
        }
        let first = if x[var] >= 0.5 { 1.0 } else { 0.0 };
        let parent = Rc::new(node);
        if Instant::now() >= deadline {
            search.push(bound, depth + 1, Some(Rc::clone(&parent)), with_fixing(&fixings, var, first));
            search.push(bound, depth + 1, Some(parent), with_fixing(&fixings, var, 1.0 - first));
            timed_out = true;
            break;
        }
        search.push(bound, depth + 1, Some(Rc::clone(&parent)), with_fixing(&fixings, var, 1.0 - first));
        let child_fixings = with_fixing(&fixings, var, first);
        let child = (*parent).clone();
        drop(parent);
        let lp = node_lp(&search.relax, Some(child), &child_fixings, deadline);
        current = Some((lp, bound, depth + 1, child_fixings));
    }

    log::debug!(
        "branch-and-bound: {} nodes in {:.2?}",
        search.nodes,
        started.elapsed()
    );
    let lb = search.global_bound(None);
    let status = match (&search.incumbent, timed_out || !search.open.is_empty()) {
        (None, false) => SolveStatus::Infeasible,
        (None, true) => SolveStatus::Timeout,
        (Some(_), false) => SolveStatus::Optimal,
        (Some((best, _)), true) => {
            if gap(*best, lb) <= 0.0 {
                SolveStatus::Optimal
            } else {
                SolveStatus::FeasibleGap
            }
        }
    };
    Ok(finish(&search, status, lb, r))
}

fn finish(search: &Search<'_>, status: SolveStatus, lower_bound: f64, r: usize) -> Solution {
    match (&search.incumbent, status) {
        (Some((obj, x)), SolveStatus::Optimal | SolveStatus::FeasibleGap) => {
            let mut sol = Solution::from_values(search.model, x);
            sol.status = status;
            sol.objective = *obj;
            if status == SolveStatus::Optimal {
                sol.lower_bound = *obj;
                sol.gap = 0.0;
            } else {
                sol.lower_bound = lower_bound;
                sol.gap = gap(*obj, lower_bound);
            }
            sol
        }
        _ => Solution::empty(r, status),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelParams};
    use crate::scenario::{CandidateEdge, Gnb, Position, ScenarioGraph};
    use crate::solve::validate_solution;
    use crate::Error;

    fn graph(n: usize, demand: f64, links: &[(usize, usize, f64)]) -> ScenarioGraph {
        let nodes = (0..n)
            .map(|i| {
                let mut g = Gnb::new(i, Position::new(i as f64 * 50.0, 0.0, 10.0));
                g.demand_mbps = Some(demand);
                g
            })
            .collect();
        let mut edges = Vec::new();
        for &(a, b, cap) in links {
            for (s, d) in [(a, b), (b, a)] {
                edges.push(CandidateEdge {
                    src: s,
                    dst: d,
                    snr_db: 30.0,
                    capacity_mbps: cap,
                });
            }
        }
        ScenarioGraph::new(1000.0, 1.0, nodes, edges).unwrap()
    }

    #[test]
    fn single_node_is_its_own_donor() {
        let g = graph(1, 500.0, &[]);
        let m = build_model(&g, &ModelParams::new(3, 4, 2)).unwrap();
        let s = solve_exact(&m, &SolveLimits::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.gap, 0.0);
    }

    #[test]
    fn star_needs_one_donor() {
        let g = graph(4, 100.0, &[(0, 1, 750.0), (0, 2, 750.0), (0, 3, 750.0)]);
        let p = ModelParams::new(2, 4, 1);
        let m = build_model(&g, &p).unwrap();
        let s = solve_exact(&m, &SolveLimits::default()).unwrap();
        assert_eq!(s.objective, 1.0);
        assert!(validate_solution(&g, &p, &s).passed());
    }

    #[test]
    fn out_degree_bound_is_strict() {
        // delta = 3 allows two children per tree
        let g = graph(4, 100.0, &[(0, 1, 750.0), (0, 2, 750.0), (0, 3, 750.0)]);
        let p = ModelParams::new(1, 3, 1);
        let s = solve_exact(&build_model(&g, &p).unwrap(), &SolveLimits::default()).unwrap();
        assert_eq!(s.objective, 2.0);
        assert!(validate_solution(&g, &p, &s).passed());
    }

    #[test]
    fn capacity_limits_tree_size() {
        // no link of the chain can carry two nodes' demand
        let g = graph(4, 300.0, &[(0, 1, 500.0), (1, 2, 500.0), (2, 3, 500.0)]);
        let p = ModelParams::new(3, 4, 1).with_airtime_per_node(false);
        let s = solve_exact(&build_model(&g, &p).unwrap(), &SolveLimits::default()).unwrap();
        assert_eq!(s.objective, 2.0);
        assert!(validate_solution(&g, &p, &s).passed());
    }

    #[test]
    fn fixed_donors_raise_the_optimum() {
        let g = graph(3, 100.0, &[(0, 1, 750.0), (1, 2, 750.0)]);
        let p = ModelParams::new(3, 4, 1);
        let m = build_model(&g, &p).unwrap();
        let free = solve_exact(&m, &SolveLimits::default()).unwrap();
        assert_eq!(free.objective, 1.0);
        let pinned = solve_exact(&m.fix_donors(&[0, 2]).unwrap(), &SolveLimits::default()).unwrap();
        assert_eq!(pinned.objective, 2.0);
        assert!(pinned.donors.contains_key(&0) && pinned.donors.contains_key(&2));
    }

    #[test]
    fn limits_are_validated() {
        let g = graph(1, 1.0, &[]);
        let m = build_model(&g, &ModelParams::default()).unwrap();
        let bad = SolveLimits::default().with_time_limit(0.0);
        assert!(matches!(solve_exact(&m, &bad), Err(Error::Parameter(_))));
    }
}
