//! Constructive plans used as starting incumbents.
//!
//! A labelled donor set is turned into trees by attaching one (node,
//! edge-set) slot at a time, always the slot with the fewest admissible
//! parents. Every attachment is checked against link load, node airtime,
//! donor egress, depth and out-degree, with demands routed along tree paths.
//! A local search starts from "everyone is a donor" and drops donors while
//! the construction still succeeds, then tries trading two donors for one.
//!
//! Work is bounded by a number of construction attempts rather than by wall
//! time, so the outcome only depends on the seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Family, MilpModel, VarKind};

const EPS: f64 = 1e-9;

/// Construction attempts per local-search move.
const TRIES_PER_MOVE: usize = 6;
/// Total construction attempts of one call.
const MAX_BUILDS: usize = 30_000;
const RESTARTS: usize = 3;

/// Donor label per node and parent per node and edge-set.
type Realized = (Vec<Option<usize>>, Parents);

type Parents = Vec<Vec<Option<usize>>>;

struct Instance {
    n: usize,
    r: usize,
    cap: Vec<Vec<Option<f64>>>,
    demand: Vec<f64>,
    cost: Vec<f64>,
    fixed: Vec<bool>,
    max_depth: usize,
    max_children: usize,
    flow: bool,
    airtime: bool,
    donor_cap: f64,
}

impl Instance {
    fn new(model: &MilpModel) -> Self {
        let graph = model.graph();
        let params = model.params();
        let n = graph.len();
        let mut cap = vec![vec![None; n]; n];
        for e in graph.edges() {
            let (a, b) = (graph.index_of(e.src).unwrap(), graph.index_of(e.dst).unwrap());
            cap[a][b] = Some(e.capacity_mbps);
        }
        let mut weight = vec![0.0; model.num_vars()];
        for &(v, c) in model.objective() {
            weight[v.0] += c;
        }
        let cost = graph
            .node_ids()
            .map(|node| {
                model
                    .var(VarKind::U { node, level: 0, set: 0 })
                    .map_or(1.0, |v| weight[v.0])
            })
            .collect();
        let mut fixed: Vec<bool> = graph.nodes().iter().map(|g| g.fixed_donor).collect();
        for c in model.constraints_of(Family::FixedDonor) {
            if let VarKind::U { node, .. } = model.variables()[c.terms[0].0 .0].kind {
                fixed[graph.index_of(node).unwrap()] = true;
            }
        }
        Self {
            n,
            r: params.redundancy,
            cap,
            demand: graph.nodes().iter().map(|g| g.demand()).collect(),
            cost,
            fixed,
            max_depth: params.max_depth,
            max_children: params.max_children(),
            flow: params.flow,
            airtime: params.airtime_per_node,
            donor_cap: model.donor_capacity(),
        }
    }
}

struct Build<'a> {
    inst: &'a Instance,
    label: &'a [Option<usize>],
    parent: Vec<Vec<Option<usize>>>,
    depth: Vec<Vec<Option<usize>>>,
    children: Vec<Vec<usize>>,
    used: Vec<Vec<bool>>,
    load: Vec<Vec<f64>>,
    air: Vec<f64>,
    egress: Vec<f64>,
}

impl<'a> Build<'a> {
    fn new(inst: &'a Instance, label: &'a [Option<usize>]) -> Self {
        let mut depth = vec![vec![None; inst.n]; inst.r];
        for (i, l) in label.iter().enumerate() {
            if let Some(k) = *l {
                depth[k][i] = Some(0);
            }
        }
        Self {
            inst,
            label,
            parent: vec![vec![None; inst.n]; inst.r],
            depth,
            children: vec![vec![0; inst.n]; inst.r],
            used: vec![vec![false; inst.n]; inst.n],
            load: vec![vec![0.0; inst.n]; inst.n],
            air: vec![0.0; inst.n],
            egress: vec![0.0; inst.n],
        }
    }

    fn admissible(&self, j: usize, k: usize, p: usize) -> bool {
        let inst = self.inst;
        if p == j || inst.cap[p][j].is_none() || self.used[p][j] || self.children[k][p] >= inst.max_children {
            return false;
        }
        let Some(dp) = self.depth[k][p] else { return false };
        if dp + 1 > inst.max_depth {
            return false;
        }
        if !inst.flow {
            return true;
        }
        let d = inst.demand[j];
        let mut extra_air: [(usize, f64); 8] = [(usize::MAX, 0.0); 8];
        let mut touched = 0;
        let mut bump = |node: usize, inc: f64, extra: &mut [(usize, f64); 8]| {
            if let Some(slot) = extra[..touched].iter_mut().find(|s| s.0 == node) {
                slot.1 += inc;
            } else if touched < extra.len() {
                extra[touched] = (node, inc);
                touched += 1;
            }
        };
        let (mut c, mut q) = (j, p);
        loop {
            let cap = inst.cap[q][c].expect("tree links exist");
            if self.load[q][c] + d > cap * (1.0 + EPS) + EPS {
                return false;
            }
            bump(q, d / cap, &mut extra_air);
            bump(c, d / cap, &mut extra_air);
            match self.parent[k][q] {
                Some(up) => {
                    c = q;
                    q = up;
                }
                None => break,
            }
        }
        if self.egress[q] + d > inst.donor_cap * (1.0 + EPS) + EPS {
            return false;
        }
        !inst.airtime || extra_air[..touched].iter().all(|&(v, inc)| self.air[v] + inc <= 1.0 + EPS)
    }

    fn attach(&mut self, j: usize, k: usize, p: usize) {
        self.parent[k][j] = Some(p);
        self.depth[k][j] = Some(self.depth[k][p].expect("parent is in the tree") + 1);
        self.children[k][p] += 1;
        self.used[p][j] = true;
        self.used[j][p] = true;
        if !self.inst.flow {
            return;
        }
        let d = self.inst.demand[j];
        let (mut c, mut q) = (j, p);
        loop {
            let cap = self.inst.cap[q][c].expect("tree links exist");
            self.load[q][c] += d;
            self.air[q] += d / cap;
            self.air[c] += d / cap;
            match self.parent[k][q] {
                Some(up) => {
                    c = q;
                    q = up;
                }
                None => break,
            }
        }
        self.egress[q] += d;
    }

    /// Attaches every open slot or gives up.
    fn run(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let inst = self.inst;
        let mut open: Vec<(usize, usize)> = (0..inst.n)
            .filter(|&j| self.label[j].is_none())
            .flat_map(|j| (0..inst.r).map(move |k| (j, k)))
            .collect();
        let mut cands = Vec::new();
        while !open.is_empty() {
            open.shuffle(rng);
            let mut best: Option<(usize, Vec<usize>)> = None;
            for (pos, &(j, k)) in open.iter().enumerate() {
                cands.clear();
                cands.extend((0..inst.n).filter(|&p| self.admissible(j, k, p)));
                if !cands.is_empty() && best.as_ref().is_none_or(|(_, b)| cands.len() < b.len()) {
                    best = Some((pos, cands.clone()));
                }
            }
            let Some((pos, mut options)) = best else { return false };
            let (j, k) = open.swap_remove(pos);
            // shallow parents with fast links first, with some noise
            options.sort_by(|&a, &b| {
                let key = |p: usize| (self.depth[k][p], -(inst.cap[p][j].unwrap_or(0.0) as i64));
                key(a).cmp(&key(b))
            });
            let mut pick = 0;
            while pick + 1 < options.len() && rng.random_bool(0.3) {
                pick += 1;
            }
            self.attach(j, k, options[pick]);
        }
        true
    }
}

struct LocalSearch<'a> {
    inst: &'a Instance,
    rng: ChaCha8Rng,
    builds: usize,
}

impl LocalSearch<'_> {
    /// Tries to build trees for `label`, relabelling donors at random on
    /// later attempts. Returns the labelling that worked.
    fn realize(&mut self, label: &[Option<usize>]) -> Option<Realized> {
        let inst = self.inst;
        let donors: Vec<usize> = (0..inst.n).filter(|&i| label[i].is_some()).collect();
        let members = inst.n - donors.len();
        if members > 0 && donors.len() < inst.r {
            return None;
        }
        for attempt in 0..TRIES_PER_MOVE {
            if self.builds >= MAX_BUILDS {
                return None;
            }
            self.builds += 1;
            let mut lab = label.to_vec();
            if attempt > 0 && inst.r > 1 {
                for &d in &donors {
                    if self.rng.random_bool(0.3) {
                        lab[d] = Some(self.rng.random_range(0..inst.r));
                    }
                }
            }
            if members > 0 {
                // every edge-set needs a root
                for k in 0..inst.r {
                    if !lab.contains(&Some(k)) {
                        let counts = |lab: &[Option<usize>], s: usize| lab.iter().filter(|&&l| l == Some(s)).count();
                        let spare: Vec<usize> =
                            donors.iter().copied().filter(|&d| counts(&lab, lab[d].unwrap()) > 1).collect();
                        if spare.is_empty() {
                            return None;
                        }
                        let donor = spare[self.rng.random_range(0..spare.len())];
                        lab[donor] = Some(k);
                    }
                }
            }
            let mut b = Build::new(inst, &lab);
            if b.run(&mut self.rng) {
                let parent = b.parent;
                return Some((lab, parent));
            }
        }
        None
    }

    fn cost(&self, label: &[Option<usize>]) -> f64 {
        (0..self.inst.n).filter(|&i| label[i].is_some()).map(|i| self.inst.cost[i]).sum()
    }

    fn descend(&mut self) -> (Vec<Option<usize>>, Vec<Vec<Option<usize>>>) {
        let inst = self.inst;
        let mut label: Vec<Option<usize>> = (0..inst.n).map(|i| Some(i % inst.r)).collect();
        let mut parent = vec![vec![None; inst.n]; inst.r];
        loop {
            let mut improved = false;
            let mut order: Vec<usize> = (0..inst.n).filter(|&i| label[i].is_some() && !inst.fixed[i]).collect();
            order.shuffle(&mut self.rng);
            order.sort_by(|&a, &b| inst.cost[b].total_cmp(&inst.cost[a]));
            for &x in &order {
                let mut lab = label.clone();
                lab[x] = None;
                if let Some((l, p)) = self.realize(&lab) {
                    (label, parent) = (l, p);
                    improved = true;
                    break;
                }
            }
            if !improved {
                improved = self.swap(&mut label, &mut parent);
            }
            if !improved || self.builds >= MAX_BUILDS {
                return (label, parent);
            }
        }
    }

    /// Replaces two donors by one non-donor when that lowers the cost.
    fn swap(&mut self, label: &mut Vec<Option<usize>>, parent: &mut Vec<Vec<Option<usize>>>) -> bool {
        let inst = self.inst;
        let donors: Vec<usize> = (0..inst.n).filter(|&i| label[i].is_some() && !inst.fixed[i]).collect();
        let others: Vec<usize> = (0..inst.n).filter(|&i| label[i].is_none()).collect();
        let mut moves = Vec::new();
        for (ai, &a) in donors.iter().enumerate() {
            for &b in &donors[ai + 1..] {
                for &z in &others {
                    if inst.cost[z] < inst.cost[a] + inst.cost[b] - EPS {
                        moves.push((a, b, z));
                    }
                }
            }
        }
        moves.shuffle(&mut self.rng);
        let before = self.cost(label);
        for (a, b, z) in moves {
            if self.builds >= MAX_BUILDS {
                return false;
            }
            let mut lab = label.clone();
            lab[z] = lab[a];
            lab[a] = None;
            lab[b] = None;
            if let Some((l, p)) = self.realize(&lab) {
                if self.cost(&l) < before - EPS {
                    *label = l;
                    *parent = p;
                    return true;
                }
            }
        }
        false
    }
}

/// A feasible-looking assignment of the model's binaries (continuous
/// variables left at zero), or `None` when the search found nothing better
/// than every node being a donor.
pub(super) fn constructive_plan(model: &MilpModel, seed: u64) -> Option<Vec<f64>> {
    let inst = Instance::new(model);
    if inst.n == 0 {
        return None;
    }
    let mut search = LocalSearch {
        inst: &inst,
        rng: ChaCha8Rng::seed_from_u64(seed),
        builds: 0,
    };
    let mut best: Option<(f64, Vec<Option<usize>>, Parents)> = None;
    for _ in 0..RESTARTS {
        let (label, parent) = search.descend();
        let c = search.cost(&label);
        if best.as_ref().is_none_or(|(bc, _, _)| c < *bc - EPS) {
            best = Some((c, label, parent));
        }
        if search.builds >= MAX_BUILDS {
            break;
        }
    }
    let (_, label, parent) = best?;
    log::debug!(
        "constructive plan with {} donors after {} builds",
        label.iter().filter(|l| l.is_some()).count(),
        search.builds
    );
    Some(to_point(model, &label, &parent))
}

fn to_point(model: &MilpModel, label: &[Option<usize>], parent: &[Vec<Option<usize>>]) -> Vec<f64> {
    let ids: Vec<_> = model.graph().node_ids().collect();
    let mut x = vec![0.0; model.num_vars()];
    let mut set = |kind: VarKind| {
        if let Some(v) = model.var(kind) {
            x[v.0] = 1.0;
        }
    };
    for (i, &node) in ids.iter().enumerate() {
        if let Some(k) = label[i] {
            set(VarKind::U { node, level: 0, set: k });
            continue;
        }
        for (k, tree) in parent.iter().enumerate() {
            let mut level = 0;
            let mut c = i;
            while let Some(p) = tree[c] {
                level += 1;
                c = p;
            }
            set(VarKind::U { node, level, set: k });
            if let Some(p) = tree[i] {
                set(VarKind::P {
                    src: ids[p],
                    dst: node,
                    set: k,
                });
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentSpec;
    use crate::model::build_model;
    use crate::solve::bnb::route_on_trees;

    #[test]
    fn plan_is_feasible_once_routed() {
        let spec = ExperimentSpec::default();
        let graph = spec.scenario(5, 10, 2).unwrap();
        let model = build_model(&graph, &spec.model_params(2)).unwrap();
        let mut x = constructive_plan(&model, 1).unwrap();
        route_on_trees(&model, &mut x);
        assert_eq!(model.violations(&x, 1e-6), Vec::<String>::new());
        assert!(model.objective_value(&x) < graph.len() as f64);
    }

    #[test]
    fn same_seed_same_plan() {
        let spec = ExperimentSpec::default();
        let graph = spec.scenario(2, 9, 1).unwrap();
        let model = build_model(&graph, &spec.model_params(1)).unwrap();
        assert_eq!(constructive_plan(&model, 7), constructive_plan(&model, 7));
    }
}
