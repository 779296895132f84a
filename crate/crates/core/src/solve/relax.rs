//! The LP relaxation handed to the simplex during branch-and-bound.
//!
//! The rows start from the model and are tightened in ways that may cut off
//! feasible points but never every optimal one. On a fixed set of trees the
//! plan that routes each node's demand along its own tree path is always
//! feasible when anything is, so the relaxation only needs to contain those
//! routings:
//!
//! * a destination's flow on a link never exceeds its demand, so the
//!   per-destination gating coefficient drops from `L` to `min(L, d_h)`;
//! * flow towards `h` in edge-set `k` can only be created at a donor of
//!   `k`, at most `d_h` of it, giving one extra row per (node, h, k);
//! * edge-sets are interchangeable, so set `k` is asked to hold at least as
//!   many donors as set `k + 1`.
//!
//! Variables pinned by branching are substituted out of the rows instead of
//! being bounded, and rows implied by variable bounds are dropped.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::model::{Family, MilpModel, Relation, VarKind};

const ROW_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
struct Row {
    terms: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

/// Rows, objective and bounds of the tightened relaxation.
#[derive(Clone, Debug)]
pub(super) struct Relaxation {
    rows: Vec<Row>,
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    binaries: Vec<usize>,
}

/// Where each model variable lives in one built LP.
#[derive(Debug)]
pub(super) struct Layout {
    columns: Vec<Option<microlp::Variable>>,
    fixed: Vec<f64>,
}

impl Layout {
    pub(super) fn column(&self, var: usize) -> Option<microlp::Variable> {
        self.columns[var]
    }

    pub(super) fn values(&self, sol: &microlp::Solution) -> Vec<f64> {
        self.columns
            .iter()
            .zip(&self.fixed)
            .map(|(c, &v)| c.map_or(v, |c| sol.var_value_raw(c)))
            .collect()
    }
}

impl Relaxation {
    pub(super) fn new(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let mut objective = vec![0.0; n];
        for &(v, c) in model.objective() {
            objective[v.0] += c;
        }
        let mut bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| v.domain.bounds()).collect();
        let demand_of = |var: usize| match model.variables()[var].kind {
            VarKind::F { dest, .. } => model.graph().node(dest).map_or(0.0, |g| g.demand()),
            _ => f64::INFINITY,
        };

        let mut rows = Vec::with_capacity(model.constraints().len());
        for c in model.constraints() {
            let mut terms: Vec<(usize, f64)> = c.terms.iter().map(|&(v, k)| (v.0, k)).collect();
            match c.family {
                Family::EdgeExistence => continue,
                Family::NoSelfFlow if c.rhs == 0.0 && terms.len() == 1 => {
                    bounds[terms[0].0] = (0.0, 0.0);
                    continue;
                }
                Family::TreeFlowGating if terms.len() == 2 => {
                    let d = demand_of(terms[0].0);
                    if d <= 0.0 {
                        bounds[terms[0].0] = (0.0, 0.0);
                        continue;
                    }
                    terms[1].1 = terms[1].1.max(-d);
                }
                _ => {}
            }
            rows.push(Row {
                terms,
                relation: c.relation,
                rhs: c.rhs,
            });
        }
        rows.extend(commodity_rows(model));
        rows.extend(symmetry_rows(model));

        let binaries = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.domain.is_integer())
            .map(|(i, _)| i)
            .collect();
        Self {
            rows,
            objective,
            bounds,
            binaries,
        }
    }

    pub(super) fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    /// Builds the LP with `fixings` substituted out. `None` when a row left
    /// without free variables is violated by the fixings.
    pub(super) fn build(&self, fixings: &[(usize, f64)]) -> Option<(Problem, Layout)> {
        let n = self.objective.len();
        let mut fixed = vec![f64::NAN; n];
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo == hi {
                fixed[i] = lo;
            }
        }
        for &(i, v) in fixings {
            fixed[i] = v;
        }
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let columns: Vec<Option<microlp::Variable>> = (0..n)
            .map(|i| fixed[i].is_nan().then(|| problem.add_var(self.objective[i], self.bounds[i])))
            .collect();
        for row in &self.rows {
            let mut rhs = row.rhs;
            let mut terms = Vec::with_capacity(row.terms.len());
            for &(v, c) in &row.terms {
                match columns[v] {
                    Some(col) => terms.push((col, c)),
                    None => rhs -= c * fixed[v],
                }
            }
            if terms.is_empty() {
                let tol = ROW_TOL * (1.0 + row.rhs.abs());
                let ok = match row.relation {
                    Relation::Le => rhs >= -tol,
                    Relation::Ge => rhs <= tol,
                    Relation::Eq => rhs.abs() <= tol,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            let op = match row.relation {
                Relation::Le => ComparisonOp::Le,
                Relation::Ge => ComparisonOp::Ge,
                Relation::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(terms.as_slice(), op, rhs);
        }
        Some((problem, Layout { columns, fixed }))
    }
}

/// `sum_out f[i,.,h,k] - sum_in f[.,i,h,k] <= d_h u[i,0,k]` for `h != i`.
fn commodity_rows(model: &MilpModel) -> Vec<Row> {
    let params = model.params();
    if !params.flow {
        return Vec::new();
    }
    let graph = model.graph();
    let ids: Vec<_> = graph.node_ids().collect();
    let mut rows = Vec::new();
    for &i in &ids {
        for &h in ids.iter().filter(|&&h| h != i) {
            let d = graph.node(h).map_or(0.0, |g| g.demand());
            for k in 0..params.redundancy {
                let mut terms = Vec::new();
                for e in graph.edges() {
                    let sign = if e.src == i {
                        1.0
                    } else if e.dst == i {
                        -1.0
                    } else {
                        continue;
                    };
                    if let Some(v) = model.var(VarKind::F {
                        src: e.src,
                        dst: e.dst,
                        dest: h,
                        set: k,
                    }) {
                        terms.push((v.0, sign));
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                let u = model
                    .var(VarKind::U { node: i, level: 0, set: k })
                    .expect("every node has a root variable per edge-set");
                terms.push((u.0, -d));
                rows.push(Row {
                    terms,
                    relation: Relation::Le,
                    rhs: 0.0,
                });
            }
        }
    }
    rows
}

/// `sum_i u[i,0,k] >= sum_i u[i,0,k+1]`.
fn symmetry_rows(model: &MilpModel) -> Vec<Row> {
    let r = model.params().redundancy;
    let ids: Vec<_> = model.graph().node_ids().collect();
    (0..r.saturating_sub(1))
        .map(|k| {
            let mut terms = Vec::with_capacity(2 * ids.len());
            for &node in &ids {
                for (set, sign) in [(k, 1.0), (k + 1, -1.0)] {
                    let u = model.var(VarKind::U { node, level: 0, set }).expect("root variable");
                    terms.push((u.0, sign));
                }
            }
            Row {
                terms,
                relation: Relation::Ge,
                rhs: 0.0,
            }
        })
        .collect()
}
