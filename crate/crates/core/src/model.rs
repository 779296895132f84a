//! Solver-agnostic mixed-integer model of the donor placement problem.
//!
//! Variables:
//! - `u[i,l,k]` binary, node `i` sits at hop distance `l` in a tree of edge-set `k`
//!   (`l = 0` means `i` is the donor rooting that tree);
//! - `P[i,j,k]` binary, link `i -> j` is active in edge-set `k`;
//! - `f[i,j,h,k]` flow in Mb/s destined to `h` on `i -> j` in edge-set `k`;
//! - `a[i,j]` fraction of airtime of link `i -> j`.
//!
//! Edge-sets are numbered from 1 in names and from 0 in the API.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::scenario::{NodeId, ScenarioGraph};

/// Structural and flow parameters of a planning run.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Maximum hop distance from a node to its donor (`D`).
    pub max_depth: usize,
    /// Out-degree bound `delta`: every node has strictly fewer children per tree.
    pub max_out_degree: usize,
    /// Number of edge-disjoint edge-sets every node must be served by (`R`).
    pub redundancy: usize,
    /// Egress cap of a donor in Mb/s; `None` means the total demand.
    pub donor_capacity_mbps: Option<f64>,
    pub flow: bool,
    /// Bound the summed airtime of all links incident to a node by one.
    pub airtime_per_node: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            max_out_degree: 4,
            redundancy: 1,
            donor_capacity_mbps: None,
            flow: true,
            airtime_per_node: true,
        }
    }
}

impl ModelParams {
    pub fn new(max_depth: usize, max_out_degree: usize, redundancy: usize) -> Self {
        Self {
            max_depth,
            max_out_degree,
            redundancy,
            ..Self::default()
        }
    }

    pub fn with_flow(mut self, flow: bool) -> Self {
        self.flow = flow;
        self
    }

    pub fn with_airtime_per_node(mut self, on: bool) -> Self {
        self.airtime_per_node = on;
        self
    }

    pub fn with_redundancy(mut self, redundancy: usize) -> Self {
        self.redundancy = redundancy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.redundancy == 0 {
            return Err(Error::Parameter("redundancy must be at least 1".into()));
        }
        if self.max_out_degree == 0 {
            return Err(Error::Parameter("out-degree bound must be at least 1".into()));
        }
        if let Some(c) = self.donor_capacity_mbps {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Parameter(format!("donor capacity must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Largest number of children a node may have in one tree.
    pub fn max_children(&self) -> usize {
        self.max_out_degree - 1
    }

    pub fn donor_capacity(&self, graph: &ScenarioGraph) -> f64 {
        self.donor_capacity_mbps.unwrap_or_else(|| graph.total_demand())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    U { node: NodeId, level: usize, set: usize },
    P { src: NodeId, dst: NodeId, set: usize },
    F { src: NodeId, dst: NodeId, dest: NodeId, set: usize },
    A { src: NodeId, dst: NodeId },
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKind::U { node, level, set } => write!(f, "u[{node},{level},{}]", set + 1),
            VarKind::P { src, dst, set } => write!(f, "P[{src},{dst},{}]", set + 1),
            VarKind::F { src, dst, dest, set } => write!(f, "f[{src},{dst},{dest},{}]", set + 1),
            VarKind::A { src, dst } => write!(f, "a[{src},{dst}]"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Binary,
    NonNegative,
    UnitInterval,
}

impl Domain {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Domain::Binary | Domain::UnitInterval => (0.0, 1.0),
            Domain::NonNegative => (0.0, f64::INFINITY),
        }
    }

    pub fn is_integer(self) -> bool {
        self == Domain::Binary
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub domain: Domain,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// Constraint families; the short tag prefixes every constraint name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    TreeMembership,
    SingleRoot,
    InDegree,
    OutDegree,
    DepthConsistency,
    EdgeExistence,
    EdgeDisjointness,
    NoSelfFlow,
    FlowConservation,
    DemandSatisfaction,
    AirtimeGating,
    NodeIngressCap,
    LinkAirtimeCap,
    TreeFlowGating,
    NodeAirtime,
    FixedDonor,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::TreeMembership => "rdist",
            Family::SingleRoot => "rsingleroot",
            Family::InDegree => "rdonor",
            Family::OutDegree => "rdeg",
            Family::DepthConsistency => "rpath",
            Family::EdgeExistence => "rexist",
            Family::EdgeDisjointness => "rdir",
            Family::NoSelfFlow => "noself",
            Family::FlowConservation => "flowcon",
            Family::DemandSatisfaction => "incflow",
            Family::AirtimeGating => "maxusage",
            Family::NodeIngressCap => "maxflowpernode",
            Family::LinkAirtimeCap => "maxflowlink",
            Family::TreeFlowGating => "maxlinkflow",
            Family::NodeAirtime => "nodeairtime",
            Family::FixedDonor => "fixdonor",
        }
    }

    pub fn is_flow(self) -> bool {
        matches!(
            self,
            Family::NoSelfFlow
                | Family::FlowConservation
                | Family::DemandSatisfaction
                | Family::AirtimeGating
                | Family::NodeIngressCap
                | Family::LinkAirtimeCap
                | Family::TreeFlowGating
                | Family::NodeAirtime
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub family: Family,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the constraint (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// The mixed-integer program for one graph and parameter set.
#[derive(Clone, Debug)]
pub struct MilpModel {
    graph: ScenarioGraph,
    params: ModelParams,
    donor_capacity: f64,
    variables: Vec<Variable>,
    lookup: HashMap<VarKind, VarId>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

impl MilpModel {
    pub fn graph(&self) -> &ScenarioGraph {
        &self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn donor_capacity(&self) -> f64 {
        self.donor_capacity
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var(&self, kind: VarKind) -> Option<VarId> {
        self.lookup.get(&kind).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn count_vars(&self, pred: impl Fn(&VarKind) -> bool) -> usize {
        self.variables.iter().filter(|v| pred(&v.kind)).count()
    }

    pub fn families(&self) -> Vec<Family> {
        let mut fams: Vec<Family> = self.constraints.iter().map(|c| c.family).collect();
        fams.sort();
        fams.dedup();
        fams
    }

    pub fn constraints_of(&self, family: Family) -> impl Iterator<Item = &Constraint> + '_ {
        self.constraints.iter().filter(move |c| c.family == family)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// True when every feasible point has an integral objective.
    pub fn objective_is_integral(&self) -> bool {
        self.objective
            .iter()
            .all(|&(v, c)| self.variables[v.0].domain.is_integer() && c.fract() == 0.0)
    }

    /// Constraints (and domains) violated by `values` beyond `tol`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (var, &x) in self.variables.iter().zip(values) {
            let (lo, hi) = var.domain.bounds();
            if x < lo - tol || x > hi + tol {
                out.push(format!("{} = {x} outside its domain", var.name));
            } else if var.domain.is_integer() && (x - x.round()).abs() > tol {
                out.push(format!("{} = {x} is fractional", var.name));
            }
        }
        for c in &self.constraints {
            let scale = 1.0 + c.rhs.abs();
            let v = c.violation(values);
            if v > tol * scale {
                out.push(format!("{} violated by {v}", c.name));
            }
        }
        out
    }

    /// The point where every node is a donor of edge-set 1.
    pub fn all_donors_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.variables.len()];
        for node in self.graph.node_ids() {
            if let Some(v) = self.var(VarKind::U { node, level: 0, set: 0 }) {
                x[v.0] = 1.0;
            }
        }
        x
    }

    /// Human-readable listing, one `name: lhs relop rhs` line per constraint.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("minimize:");
        for &(v, c) in &self.objective {
            let _ = write!(out, " {}", Term(c, &self.variables[v.0].name));
        }
        out.push('\n');
        for c in &self.constraints {
            let _ = write!(out, "{}:", c.name);
            for &(v, coef) in &c.terms {
                let _ = write!(out, " {}", Term(coef, &self.variables[v.0].name));
            }
            let _ = writeln!(out, " {} {}", c.relation, c.rhs);
        }
        out
    }

    /// Pins the listed nodes as donors: `sum_k u[i,0,k] = 1`.
    pub fn fix_donors(mut self, ids: &[NodeId]) -> Result<Self> {
        for &id in ids {
            if !self.graph.contains(id) {
                return Err(Error::Parameter(format!("cannot pin unknown node {id}")));
            }
        }
        for &id in ids {
            let name = format!("fixdonor[{id}]");
            if self.constraints.iter().any(|c| c.name == name) {
                continue;
            }
            let terms = (0..self.params.redundancy)
                .map(|k| (self.u(id, 0, k), 1.0))
                .collect();
            self.constraints.push(Constraint {
                name,
                family: Family::FixedDonor,
                terms,
                relation: Relation::Eq,
                rhs: 1.0,
            });
        }
        Ok(self)
    }

    /// Replaces the unit donor cost by a per-node cost; missing nodes cost 1.
    pub fn weighted_objective(mut self, cost_per_node: &BTreeMap<NodeId, f64>) -> Result<Self> {
        for (&id, &cost) in cost_per_node {
            if !self.graph.contains(id) {
                return Err(Error::Parameter(format!("cost given for unknown node {id}")));
            }
            if !(cost.is_finite() && cost >= 0.0) {
                return Err(Error::Parameter(format!("cost of node {id} must be non-negative")));
            }
        }
        let mut objective = Vec::new();
        for id in self.graph.node_ids().collect::<Vec<_>>() {
            let cost = cost_per_node.get(&id).copied().unwrap_or(1.0);
            for k in 0..self.params.redundancy {
                objective.push((self.u(id, 0, k), cost));
            }
        }
        self.objective = objective;
        Ok(self)
    }

    fn u(&self, node: NodeId, level: usize, set: usize) -> VarId {
        self.lookup[&VarKind::U { node, level, set }]
    }
}

struct Term<'a>(f64, &'a str);

impl fmt::Display for Term<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Term(c, name) = *self;
        if c == 1.0 {
            write!(f, "+ {name}")
        } else if c == -1.0 {
            write!(f, "- {name}")
        } else if c < 0.0 {
            write!(f, "- {} {name}", -c)
        } else {
            write!(f, "+ {c} {name}")
        }
    }
}

struct Builder {
    variables: Vec<Variable>,
    lookup: HashMap<VarKind, VarId>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn add_var(&mut self, kind: VarKind, domain: Domain) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            kind,
            domain,
            name: kind.to_string(),
        });
        self.lookup.insert(kind, id);
        id
    }

    fn get(&self, kind: VarKind) -> VarId {
        self.lookup[&kind]
    }

    fn add(&mut self, family: Family, index: String, terms: Vec<(VarId, f64)>, relation: Relation, rhs: f64) {
        if terms.is_empty() {
            return;
        }
        self.constraints.push(Constraint {
            name: format!("{}[{index}]", family.tag()),
            family,
            terms,
            relation,
            rhs,
        });
    }
}

/// Builds the full model for `graph`.
///
/// Nodes flagged as fixed donors in the graph are pinned via
/// [`MilpModel::fix_donors`].
pub fn build_model(graph: &ScenarioGraph, params: &ModelParams) -> Result<MilpModel> {
    params.validate()?;
    if params.flow && !graph.has_demands() {
        return Err(Error::Config(
            "flow constraints need a demand on every node".into(),
        ));
    }
    let r = params.redundancy;
    let depth = params.max_depth;
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let edges: Vec<(NodeId, NodeId, f64)> = graph
        .edges()
        .iter()
        .map(|e| (e.src, e.dst, e.capacity_mbps))
        .collect();

    let mut b = Builder {
        variables: Vec::new(),
        lookup: HashMap::new(),
        constraints: Vec::new(),
    };

    for &node in &ids {
        for set in 0..r {
            for level in 0..=depth {
                b.add_var(VarKind::U { node, level, set }, Domain::Binary);
            }
        }
    }
    for &(src, dst, _) in &edges {
        for set in 0..r {
            b.add_var(VarKind::P { src, dst, set }, Domain::Binary);
        }
    }
    if params.flow {
        for &(src, dst, _) in &edges {
            for set in 0..r {
                for &dest in &ids {
                    b.add_var(VarKind::F { src, dst, dest, set }, Domain::NonNegative);
                }
            }
        }
        for &(src, dst, _) in &edges {
            b.add_var(VarKind::A { src, dst }, Domain::UnitInterval);
        }
    }

    let u = |b: &Builder, node, level, set| b.get(VarKind::U { node, level, set });
    let p = |b: &Builder, src, dst, set| b.get(VarKind::P { src, dst, set });
    let f = |b: &Builder, src, dst, dest, set| b.get(VarKind::F { src, dst, dest, set });
    let a = |b: &Builder, src, dst| b.get(VarKind::A { src, dst });
    let set_name = |k: usize| k + 1;

    // every node sits at exactly one level of each edge-set, unless it is a
    // donor of another edge-set
    for &i in &ids {
        for k in 0..r {
            let mut terms: Vec<_> = (0..=depth).map(|l| (u(&b, i, l, k), 1.0)).collect();
            terms.extend((0..r).filter(|&o| o != k).map(|o| (u(&b, i, 0, o), 1.0)));
            b.add(Family::TreeMembership, format!("{i},{}", set_name(k)), terms, Relation::Eq, 1.0);
        }
    }
    for &i in &ids {
        let terms = (0..r).map(|k| (u(&b, i, 0, k), 1.0)).collect();
        b.add(Family::SingleRoot, format!("{i}"), terms, Relation::Le, 1.0);
    }
    for &j in &ids {
        for k in 0..r {
            let mut terms: Vec<_> = edges
                .iter()
                .filter(|e| e.1 == j)
                .map(|e| (p(&b, e.0, j, k), 1.0))
                .collect();
            terms.extend((0..r).map(|o| (u(&b, j, 0, o), 1.0)));
            b.add(Family::InDegree, format!("{j},{}", set_name(k)), terms, Relation::Eq, 1.0);
        }
    }
    for &i in &ids {
        for k in 0..r {
            let terms = edges
                .iter()
                .filter(|e| e.0 == i)
                .map(|e| (p(&b, i, e.1, k), 1.0))
                .collect();
            b.add(
                Family::OutDegree,
                format!("{i},{}", set_name(k)),
                terms,
                Relation::Le,
                params.max_children() as f64,
            );
        }
    }
    for &(i, j, _) in &edges {
        for k in 0..r {
            for l in 1..=depth {
                let terms = vec![(p(&b, i, j, k), 1.0), (u(&b, j, l, k), 1.0), (u(&b, i, l - 1, k), -1.0)];
                b.add(
                    Family::DepthConsistency,
                    format!("{i},{j},{},{l}", set_name(k)),
                    terms,
                    Relation::Le,
                    1.0,
                );
            }
        }
    }
    // `P <= e[i,j]`; links outside the graph have no P variable at all
    for &(i, j, _) in &edges {
        for k in 0..r {
            b.add(
                Family::EdgeExistence,
                format!("{i},{j},{}", set_name(k)),
                vec![(p(&b, i, j, k), 1.0)],
                Relation::Le,
                1.0,
            );
        }
    }
    for &(i, j, _) in &edges {
        let reverse = graph.edge(j, i).is_some();
        if reverse && j < i {
            continue;
        }
        let mut terms: Vec<_> = (0..r).map(|k| (p(&b, i, j, k), 1.0)).collect();
        if reverse {
            terms.extend((0..r).map(|k| (p(&b, j, i, k), 1.0)));
        }
        let (lo, hi) = (i.min(j), i.max(j));
        b.add(Family::EdgeDisjointness, format!("{lo},{hi}"), terms, Relation::Le, 1.0);
    }

    let donor_capacity = params.donor_capacity(graph);
    if params.flow {
        for &(i, j, _) in &edges {
            for k in 0..r {
                b.add(
                    Family::NoSelfFlow,
                    format!("{i},{j},{}", set_name(k)),
                    vec![(f(&b, i, j, i, k), 1.0)],
                    Relation::Eq,
                    0.0,
                );
            }
        }
        for &i in &ids {
            for k in 0..r {
                let mut terms = Vec::new();
                for &(s, d, _) in edges.iter().filter(|e| e.0 == i) {
                    terms.extend(ids.iter().map(|&h| (f(&b, s, d, h, k), 1.0)));
                }
                for &(s, d, _) in edges.iter().filter(|e| e.1 == i) {
                    terms.extend(ids.iter().filter(|&&h| h != i).map(|&h| (f(&b, s, d, h, k), -1.0)));
                }
                terms.extend((0..r).map(|o| (u(&b, i, 0, o), -donor_capacity)));
                b.add(Family::FlowConservation, format!("{i},{}", set_name(k)), terms, Relation::Le, 0.0);
            }
        }
        for &i in &ids {
            let demand = graph.node(i).map_or(0.0, |n| n.demand());
            for k in 0..r {
                let mut terms: Vec<_> = edges
                    .iter()
                    .filter(|e| e.1 == i)
                    .map(|e| (f(&b, e.0, i, i, k), 1.0))
                    .collect();
                terms.extend((0..r).map(|o| (u(&b, i, 0, o), demand)));
                b.add(
                    Family::DemandSatisfaction,
                    format!("{i},{}", set_name(k)),
                    terms,
                    Relation::Ge,
                    demand,
                );
            }
        }
        for &(i, j, _) in &edges {
            let mut terms = vec![(a(&b, i, j), 1.0)];
            terms.extend((0..r).map(|k| (p(&b, i, j, k), -1.0)));
            b.add(Family::AirtimeGating, format!("{i},{j}"), terms, Relation::Le, 0.0);
        }
        for &j in &ids {
            let mut terms = Vec::new();
            for &(i, _, cap) in edges.iter().filter(|e| e.1 == j) {
                for k in 0..r {
                    terms.extend(ids.iter().map(|&h| (f(&b, i, j, h, k), 1.0)));
                }
                terms.push((a(&b, i, j), -cap));
            }
            b.add(Family::NodeIngressCap, format!("{j}"), terms, Relation::Le, 0.0);
        }
        for &(i, j, cap) in &edges {
            let mut terms = Vec::new();
            for k in 0..r {
                terms.extend(ids.iter().map(|&h| (f(&b, i, j, h, k), 1.0)));
            }
            terms.push((a(&b, i, j), -cap));
            b.add(Family::LinkAirtimeCap, format!("{i},{j}"), terms, Relation::Le, 0.0);
        }
        for &(i, j, cap) in &edges {
            for k in 0..r {
                for &h in &ids {
                    b.add(
                        Family::TreeFlowGating,
                        format!("{i},{j},{h},{}", set_name(k)),
                        vec![(f(&b, i, j, h, k), 1.0), (p(&b, i, j, k), -cap)],
                        Relation::Le,
                        0.0,
                    );
                }
            }
        }
        if params.airtime_per_node {
            for &v in &ids {
                let terms = edges
                    .iter()
                    .filter(|e| e.0 == v || e.1 == v)
                    .map(|e| (a(&b, e.0, e.1), 1.0))
                    .collect();
                b.add(Family::NodeAirtime, format!("{v}"), terms, Relation::Le, 1.0);
            }
        }
    }

    let objective = ids
        .iter()
        .flat_map(|&i| (0..r).map(move |k| (i, k)))
        .map(|(i, k)| (u(&b, i, 0, k), 1.0))
        .collect();

    let model = MilpModel {
        graph: graph.clone(),
        params: params.clone(),
        donor_capacity,
        variables: b.variables,
        lookup: b.lookup,
        constraints: b.constraints,
        objective,
    };
    let pinned = graph.fixed_donors();
    if pinned.is_empty() {
        Ok(model)
    } else {
        model.fix_donors(&pinned)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CandidateEdge, Gnb, Position};

    pub(crate) fn complete_graph(n: usize, demand: f64, cap: f64) -> ScenarioGraph {
        let nodes = (0..n)
            .map(|i| {
                let mut g = Gnb::new(i, Position::new(i as f64 * 10.0, 0.0, 10.0));
                g.demand_mbps = Some(demand);
                g
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    edges.push(CandidateEdge {
                        src: i,
                        dst: j,
                        snr_db: 30.0,
                        capacity_mbps: cap,
                    });
                }
            }
        }
        ScenarioGraph::new(1000.0, 1.0, nodes, edges).unwrap()
    }

    #[test]
    fn u_count_for_eighteen_nodes() {
        let g = complete_graph(18, 100.0, 750.0);
        let m = build_model(&g, &ModelParams::new(3, 4, 2).with_flow(false)).unwrap();
        assert_eq!(m.count_vars(|k| matches!(k, VarKind::U { .. })), 144);
        assert_eq!(m.count_vars(|k| matches!(k, VarKind::P { .. })), 18 * 17 * 2);
    }

    #[test]
    fn topology_only_model_has_seven_families() {
        let g = complete_graph(4, 100.0, 750.0);
        let m = build_model(&g, &ModelParams::new(3, 4, 1).with_flow(false)).unwrap();
        assert_eq!(m.families().len(), 7);
        assert_eq!(m.count_vars(|k| matches!(k, VarKind::F { .. } | VarKind::A { .. })), 0);
    }

    #[test]
    fn flow_model_families_and_counts() {
        let g = complete_graph(4, 100.0, 750.0);
        let m = build_model(&g, &ModelParams::new(2, 4, 2)).unwrap();
        assert_eq!(m.families().len(), 15);
        let e = g.edges().len();
        assert_eq!(m.count_vars(|k| matches!(k, VarKind::F { .. })), e * 4 * 2);
        assert_eq!(m.count_vars(|k| matches!(k, VarKind::A { .. })), e);
        let m = build_model(&g, &ModelParams::new(2, 4, 2).with_airtime_per_node(false)).unwrap();
        assert_eq!(m.families().len(), 14);
    }

    #[test]
    fn flow_without_demand_is_a_configuration_error() {
        let g = ScenarioGraph::new(1000.0, 1.0, vec![Gnb::new(0, Position::new(0.0, 0.0, 10.0))], vec![])
            .unwrap();
        assert!(matches!(build_model(&g, &ModelParams::default()), Err(Error::Config(_))));
        assert!(build_model(&g, &ModelParams::default().with_flow(false)).is_ok());
    }

    #[test]
    fn all_donors_point_is_feasible() {
        let g = complete_graph(5, 300.0, 750.0);
        for r in 1..=2 {
            let m = build_model(&g, &ModelParams::new(3, 4, r)).unwrap();
            let x = m.all_donors_point();
            assert!(m.violations(&x, 1e-9).is_empty());
            assert_eq!(m.objective_value(&x), 5.0);
        }
    }

    #[test]
    fn build_is_deterministic() {
        let g = complete_graph(4, 100.0, 750.0);
        let p = ModelParams::new(3, 3, 2);
        assert_eq!(build_model(&g, &p).unwrap().dump(), build_model(&g, &p).unwrap().dump());
    }

    #[test]
    fn dump_lists_named_constraints() {
        let g = complete_graph(2, 100.0, 750.0);
        let dump = build_model(&g, &ModelParams::new(1, 2, 1)).unwrap().dump();
        assert!(dump.contains("rsingleroot[0]: + u[0,0,1] <= 1"), "{dump}");
        assert!(dump.contains("rdeg[0,1]: + P[0,1,1] <= 1"));
        assert!(dump.contains("rdir[0,1]: + P[0,1,1] + P[1,0,1] <= 1"));
        assert!(dump.contains("incflow[1,1]: + f[0,1,1,1] + 100 u[1,0,1] >= 100"));
        assert!(dump.contains("maxlinkflow[0,1,1,1]: + f[0,1,1,1] - 750 P[0,1,1] <= 0"));
        assert!(dump.starts_with("minimize: + u[0,0,1] + u[1,0,1]\n"));
    }

    #[test]
    fn fix_donors_validates_ids() {
        let g = complete_graph(3, 100.0, 750.0);
        let m = build_model(&g, &ModelParams::new(2, 3, 2)).unwrap();
        assert!(matches!(m.clone().fix_donors(&[7]), Err(Error::Parameter(_))));
        let m = m.fix_donors(&[1, 1]).unwrap();
        let pins: Vec<_> = m.constraints_of(Family::FixedDonor).collect();
        assert_eq!(pins.len(), 1);
        assert_eq!(pins[0].terms.len(), 2);
    }

    #[test]
    fn graph_pins_are_applied() {
        let g = complete_graph(3, 100.0, 750.0).with_fixed_donors(&[2]).unwrap();
        let m = build_model(&g, &ModelParams::new(2, 3, 1)).unwrap();
        assert_eq!(m.constraints_of(Family::FixedDonor).count(), 1);
    }

    #[test]
    fn weighted_objective_rejects_negative_costs() {
        let g = complete_graph(3, 100.0, 750.0);
        let m = build_model(&g, &ModelParams::new(2, 3, 1)).unwrap();
        let bad: BTreeMap<_, _> = [(0, -1.0)].into();
        assert!(matches!(m.clone().weighted_objective(&bad), Err(Error::Parameter(_))));
        let costs: BTreeMap<_, _> = [(0, 10.0), (1, 0.5)].into();
        let m = m.weighted_objective(&costs).unwrap();
        assert!(!m.objective_is_integral());
        let x = m.all_donors_point();
        assert_eq!(m.objective_value(&x), 11.5);
    }
}
