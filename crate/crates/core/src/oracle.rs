//! Brute-force references: exhaustive search over a region model, a continuous
//! grid search on the network physics, and LP vertex enumeration.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::cost::FactorFn;
use crate::discretize::{Label, Partition};
use crate::graph::{CoordSemantic, FactorGraph, ObjectiveMode};
use crate::interval::Interval;
use crate::lp::{LinearProgram, RowKind};
use crate::network::{apply_transform, Network, NodeId, TransformKind};
use crate::physics::{Direction, PhysicsKind};
use crate::region::RegionModel;
use crate::{Error, Result};

/// Default enumeration cap.
pub const DEFAULT_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Best objective found.
    pub value: f64,
    /// Cell labels, for the discretized mode.
    pub labels: Option<Vec<Label>>,
    /// One value per coordinate.
    pub point: Vec<f64>,
    /// Largest constraint violation at `point`.
    pub residual: f64,
    /// True when `residual` is within the requested tolerance.
    pub feasible: bool,
    /// Search nodes or grid points visited.
    pub enumerated: usize,
}

fn too_large(cap: usize) -> Error {
    Error::ResourceCap(format!("instance too large for oracle (cap {cap})"))
}

/// Exact minimum of the region model by depth-first branch and bound with
/// forward checking. The value is the discretized optimum.
pub fn discretized_optimum(model: &RegionModel, cap: usize) -> Result<(f64, Vec<Label>, usize)> {
    let n = model.vars();
    let by_var = model.by_var();
    // static order: grow from variable 0 along shared regions, most assigned neighbours first
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut score = vec![0usize; n];
    while order.len() < n {
        let next = (0..n).filter(|&v| !placed[v]).max_by_key(|&v| (score[v], core::cmp::Reverse(v))).unwrap();
        placed[next] = true;
        order.push(next);
        for &r in &by_var[next] {
            for &u in &model.regions[r].scope {
                score[u] += 1;
            }
        }
    }
    let alive: Vec<Vec<u32>> = model.regions.iter().map(|t| (0..t.len() as u32).collect()).collect();
    let mut s = Search { model, by_var: &by_var, order: &order, best: f64::INFINITY, best_a: Vec::new(), a: vec![0; n], nodes: 0, cap };
    s.go(0, alive)?;
    if !s.best.is_finite() {
        return Err(Error::DiscretizationInfeasible("no labelling satisfies every region".into()));
    }
    Ok((s.best, s.best_a, s.nodes))
}

struct Search<'a> {
    model: &'a RegionModel,
    by_var: &'a [Vec<usize>],
    order: &'a [usize],
    best: f64,
    best_a: Vec<Label>,
    a: Vec<Label>,
    nodes: usize,
    cap: usize,
}

impl Search<'_> {
    fn bound(&self, alive: &[Vec<u32>]) -> f64 {
        alive.iter().zip(&self.model.regions).map(|(al, t)| al.iter().map(|&i| t.cost[i as usize]).fold(f64::INFINITY, f64::min)).sum()
    }

    fn go(&mut self, depth: usize, alive: Vec<Vec<u32>>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(too_large(self.cap));
        }
        let lb = self.bound(&alive);
        if !(lb < self.best) {
            return Ok(());
        }
        if depth == self.order.len() {
            self.best = lb;
            self.best_a = self.a.clone();
            return Ok(());
        }
        let v = self.order[depth];
        for &l in &self.model.support[v] {
            let mut next = alive.clone();
            let mut ok = true;
            for &r in &self.by_var[v] {
                let t = &self.model.regions[r];
                let pos = t.scope.iter().position(|&x| x == v).unwrap();
                next[r].retain(|&i| t.tuple(i as usize)[pos] == l);
                if next[r].is_empty() {
                    ok = false;
                    break;
                }
            }
            if ok {
                self.a[v] = l;
                self.go(depth + 1, next)?;
            }
        }
        Ok(())
    }
}

/// Discretized oracle result with the cell midpoints as the point.
pub fn grid_discretized(gm: &FactorGraph, part: &Partition, model: &RegionModel, cap: usize) -> Result<OracleResult> {
    let (value, labels, nodes) = discretized_optimum(model, cap)?;
    let point = crate::region::representative_point(gm, part, &labels);
    let residual = gm.max_residual(&point);
    Ok(OracleResult { value, labels: Some(labels), point, residual, feasible: true, enumerated: nodes })
}

#[derive(Clone, Debug)]
pub struct ContinuousOptions {
    pub cap: usize,
    pub seed: u64,
    /// Residual accepted as feasible.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Sample `cap` grid points instead of refusing a larger grid.
    pub sample: bool,
}

impl Default for ContinuousOptions {
    fn default() -> Self {
        ContinuousOptions { cap: DEFAULT_CAP, seed: 0, tol: 1e-7, max_sweeps: 200, sample: false }
    }
}

/// A network state: potentials (input side for transform nodes) and ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub potentials: BTreeMap<NodeId, Vec<f64>>,
    pub ratios: BTreeMap<NodeId, f64>,
}

/// Objective, violation and injections of a state, from the physics formulas.
pub fn evaluate_state(net: &Network, objective: ObjectiveMode, st: &State) -> Result<(f64, f64, BTreeMap<NodeId, Vec<f64>>)> {
    let kk = net.components;
    let slack = net.slack_id().ok_or_else(|| Error::InvalidArgument("no slack node".into()))?;
    let seen = |node: NodeId, other: NodeId| -> Result<Vec<f64>> {
        let n = net.node(node).unwrap();
        let p = &st.potentials[&node];
        match &n.transform {
            Some(t) if t.out_port == other => apply_transform(&t.kind, p, st.ratios.get(&node).copied()),
            _ => Ok(p.clone()),
        }
    };
    let mut q: BTreeMap<NodeId, Vec<f64>> = net.nodes.iter().map(|n| (n.id, vec![0.0; kk])).collect();
    let mut viol = 0.0f64;
    let mut cost = 0.0;
    for e in &net.edges {
        let pi = seen(e.from, e.to)?;
        let pj = seen(e.to, e.from)?;
        let f = e.physics.flow(&pi, &pj, Direction::Forward)?;
        let r = e.physics.flow(&pi, &pj, Direction::Reverse)?;
        let rd = e.reverse_domain();
        for c in 0..kk {
            q.get_mut(&e.from).unwrap()[c] += f[c];
            q.get_mut(&e.to).unwrap()[c] += r[c];
            viol = viol.max(e.flow_domain[c].distance(f[c])).max(rd[c].distance(r[c]));
        }
        for (node, other, p) in [(e.from, e.to, &pi), (e.to, e.from, &pj)] {
            let n = net.node(node).unwrap();
            let dom = match &n.transform {
                Some(t) if t.out_port == other => net.transform_out_domain(n),
                _ => n.potential.clone(),
            };
            for c in 0..kk {
                viol = viol.max(dom[c].distance(p[c]));
            }
        }
        if objective == ObjectiveMode::DistributionLoss {
            if let PhysicsKind::AcPowerVoltage { r, x } | PhysicsKind::AcCurrentVoltage { r, x } = e.physics {
                cost += FactorFn::LineLoss { r, x }.eval(&[pi[0], pi[1], pj[0], pj[1]]);
            }
        }
    }
    for n in &net.nodes {
        for (c, p) in st.potentials[&n.id].iter().enumerate() {
            viol = viol.max(n.potential[c].distance(*p));
        }
        if let (Some(t), Some(a)) = (&n.transform, st.ratios.get(&n.id)) {
            if let TransformKind::VariableRatio { domain, cost: ca } = &t.kind {
                viol = viol.max(domain.distance(*a));
                if objective == ObjectiveMode::OptimalGas {
                    cost += ca.eval(*a);
                }
            }
        }
        if n.id == slack {
            continue;
        }
        let qi = &q[&n.id];
        let se = objective == ObjectiveMode::StateEstimation;
        let meas = n.measurement.as_ref().and_then(|m| m.injection.clone()).filter(|_| se);
        for c in 0..kk {
            let dom = match &meas {
                Some(m) => Interval::point(m[c]),
                None => n.injection[c],
            };
            if se {
                cost += dom.distance(qi[c]);
            } else {
                viol = viol.max(dom.distance(qi[c]));
            }
        }
        let current = net.incident(n.id).iter().any(|&e| matches!(net.edges[e].physics, PhysicsKind::AcCurrentVoltage { .. }));
        match objective {
            ObjectiveMode::MinCost if current => {
                let v = &st.potentials[&n.id];
                cost += FactorFn::InjectionPower(n.cost.clone()).eval(&[v[0], v[1], qi[0], qi[1]]);
            }
            ObjectiveMode::MinCost | ObjectiveMode::OptimalGas => cost += n.cost.eval(qi[0]),
            _ => {}
        }
    }
    for g in &net.aggregators {
        let s: f64 = g.members.iter().map(|m| q[m][g.component]).sum();
        viol = viol.max(g.lower - s.abs()).max(s.abs() - g.upper);
    }
    Ok((cost, viol, q))
}

/// Net outflow of one node as a function of its own potential.
fn outflow(net: &Network, st: &State, node: NodeId) -> Result<f64> {
    let n = net.node(node).unwrap();
    let mut s = 0.0;
    for &ei in &net.incident(node) {
        let e = &net.edges[ei];
        let other = if e.from == node { e.to } else { e.from };
        let see = |id: NodeId, oth: NodeId| -> Result<Vec<f64>> {
            let nd = net.node(id).unwrap();
            match &nd.transform {
                Some(t) if t.out_port == oth => apply_transform(&t.kind, &st.potentials[&id], st.ratios.get(&id).copied()),
                _ => Ok(st.potentials[&id].clone()),
            }
        };
        let (pi, pj) = (see(e.from, e.to)?, see(e.to, e.from)?);
        let dir = if e.from == node { Direction::Forward } else { Direction::Reverse };
        s += e.physics.flow(&pi, &pj, dir)?[0];
        let _ = (n, other);
    }
    Ok(s)
}

/// Moves each free potential so its injection lands in its allowed range
/// (Gauss-Seidel over nodes, bisection per node). Only for one-component networks
/// whose edges are monotone in the potential difference.
fn repair(net: &Network, objective: ObjectiveMode, st: &mut State, sweeps: usize) -> Result<()> {
    let slack = net.slack_id().unwrap();
    let se = objective == ObjectiveMode::StateEstimation;
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for n in &net.nodes {
            if n.id == slack || n.potential[0].is_point() || net.incident(n.id).is_empty() {
                continue;
            }
            if se && n.measurement.as_ref().map_or(false, |m| m.potential.is_some()) {
                continue;
            }
            let target_dom = match n.measurement.as_ref().and_then(|m| m.injection.clone()).filter(|_| se) {
                Some(m) => Interval::point(m[0]),
                None => n.injection[0],
            };
            let q = outflow(net, st, n.id)?;
            if target_dom.contains(q) {
                continue;
            }
            // aim slightly inside a band so the repaired injection lands in it
            let margin = 1e-7 * target_dom.width();
            let target = Interval::new(target_dom.lo + margin, target_dom.hi - margin).clamp(q);
            let dom = n.potential[0];
            let old = st.potentials[&n.id][0];
            let mut eval = |p: f64| -> Result<f64> {
                st.potentials.get_mut(&n.id).unwrap()[0] = p;
                outflow(net, st, n.id).map(|v| v - target)
            };
            let (mut lo, mut hi) = (dom.lo, dom.hi);
            let (flo, fhi) = (eval(lo)?, eval(hi)?);
            let p = if flo >= 0.0 {
                lo
            } else if fhi <= 0.0 {
                hi
            } else {
                for _ in 0..200 {
                    let mid = lo + (hi - lo) / 2.0;
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if eval(mid)? < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                // keep the endpoint whose injection is closer to the target
                if eval(lo)?.abs() <= eval(hi)?.abs() {
                    lo
                } else {
                    hi
                }
            };
            st.potentials.get_mut(&n.id).unwrap()[0] = p;
            moved = moved.max((p - old).abs());
        }
        if moved == 0.0 {
            break;
        }
    }
    Ok(())
}

/// Grid search over cell midpoints of each node's potential and each ratio, with
/// injection repair on monotone one-component networks. A grid larger than `cap`
/// is refused, or sampled with a seeded generator when `sample` is set.
pub fn grid_continuous(gm: &FactorGraph, part: &Partition, opts: &ContinuousOptions) -> Result<OracleResult> {
    let mut best: Option<(bool, f64, f64, State)> = None;
    let count = walk_grid(gm, part, opts, |st, cost, viol| {
        let feasible = viol <= opts.tol;
        let better = match &best {
            None => true,
            Some((bf, bc, bv, _)) => match (feasible, *bf) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => cost < *bc,
                (false, false) => viol < *bv,
            },
        };
        if better {
            best = Some((feasible, cost, viol, st));
        }
    })?;
    let (feasible, value, residual, st) = best.ok_or_else(|| Error::Internal("empty grid".into()))?;
    let point = gm.point_from_state(&st.potentials, &st.ratios)?;
    Ok(OracleResult { value, labels: None, point, residual, feasible, enumerated: count })
}

/// Every feasible point the grid search visits, as coordinate vectors.
pub fn continuous_samples(gm: &FactorGraph, part: &Partition, opts: &ContinuousOptions) -> Result<Vec<OracleResult>> {
    let mut out = Vec::new();
    let mut err = None;
    walk_grid(gm, part, opts, |st, cost, viol| {
        if viol > opts.tol || err.is_some() {
            return;
        }
        match gm.point_from_state(&st.potentials, &st.ratios) {
            Ok(point) => out.push(OracleResult { value: cost, labels: None, point, residual: viol, feasible: true, enumerated: 1 }),
            Err(e) => err = Some(e),
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn walk_grid(gm: &FactorGraph, part: &Partition, opts: &ContinuousOptions, mut visit: impl FnMut(State, f64, f64)) -> Result<usize> {
    let origin = gm.origin.as_ref().ok_or_else(|| Error::Unsupported("continuous oracle needs a network graph".into()))?;
    let net = &origin.network;
    let kk = net.components;
    // grid axes: (node, component) potentials, then ratios
    let mut axes: Vec<(NodeId, Option<usize>, Vec<f64>)> = Vec::new();
    for n in &net.nodes {
        let inc = net.incident(n.id);
        for c in 0..kk {
            let coord = gm.coords.iter().position(|co| match co.semantic {
                CoordSemantic::PotentialCopy { node, edge, component } => {
                    let e = &net.edges[edge];
                    let other = if e.from == node { e.to } else { e.from };
                    node == n.id && component == c && n.transform.as_ref().map_or(true, |t| t.out_port != other) && inc.contains(&edge)
                }
                _ => false,
            });
            let mids = match coord {
                Some(k) => (0..part.cells(k)).map(|j| part.cell(k, j).mid()).collect(),
                None => vec![n.potential[c].mid()],
            };
            axes.push((n.id, Some(c), mids));
        }
    }
    for (k, co) in gm.coords.iter().enumerate() {
        if let CoordSemantic::Ratio { node } = co.semantic {
            axes.push((node, None, (0..part.cells(k)).map(|j| part.cell(k, j).mid()).collect()));
        }
    }
    let sizes: Vec<usize> = axes.iter().map(|a| a.2.len()).collect();
    let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s));
    let exhaustive = matches!(total, Some(t) if t <= opts.cap);
    if !exhaustive && !opts.sample {
        return Err(too_large(opts.cap));
    }
    let count = if exhaustive { total.unwrap() } else { opts.cap };
    let monotone = kk == 1 && net.edges.iter().all(|e| e.physics.monotone_law().is_some());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut idx = vec![0usize; axes.len()];
    for step in 0..count {
        if exhaustive {
            if step > 0 {
                for k in (0..idx.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < sizes[k] {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        } else {
            for (k, s) in sizes.iter().enumerate() {
                idx[k] = (rng.next_u64() % *s as u64) as usize;
            }
        }
        let mut st = State { potentials: net.nodes.iter().map(|n| (n.id, vec![0.0; kk])).collect(), ratios: BTreeMap::new() };
        for (k, (node, comp, vals)) in axes.iter().enumerate() {
            match comp {
                Some(c) => st.potentials.get_mut(node).unwrap()[*c] = vals[idx[k]],
                None => {
                    st.ratios.insert(*node, vals[idx[k]]);
                }
            }
        }
        if monotone {
            repair(net, origin.objective, &mut st, opts.max_sweeps)?;
        }
        let (cost, viol, _) = evaluate_state(net, origin.objective, &st)?;
        visit(st, cost, viol);
    }
    Ok(count)
}

/// Optimum of a small LP by enumerating basic solutions. `None` when infeasible.
/// At most eight structural columns.
pub fn lp_vertex_enumerate(lp: &LinearProgram) -> Result<Option<f64>> {
    let n = lp.cols.len();
    if n > 8 {
        return Err(Error::ResourceCap("vertex enumeration is limited to eight columns".into()));
    }
    // equality form: structural columns, then one slack per inequality or finite bound
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut extra = 0;
    let mut kinds = Vec::new();
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        for &(c, v) in &r.coeffs {
            a[c] += v;
        }
        rows.push((a, r.rhs));
        kinds.push(r.kind);
        if r.kind != RowKind::Eq {
            extra += 1;
        }
    }
    // an upper bound already implied by a nonnegative equality row adds no vertices
    let implied = |j: usize| {
        lp.rows.iter().any(|r| {
            r.kind == RowKind::Eq
                && r.coeffs.iter().all(|&(_, v)| v >= 0.0)
                && r.coeffs.iter().any(|&(c, v)| c == j && v > 0.0 && r.rhs / v <= lp.upper[j])
        })
    };
    for j in 0..n {
        if lp.upper[j].is_finite() && !implied(j) {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, lp.upper[j]));
            kinds.push(RowKind::Le);
            extra += 1;
        }
    }
    let total = n + extra;
    let mut mat: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut s = n;
    for ((a, b), k) in rows.into_iter().zip(kinds) {
        let mut row = a;
        row.resize(total, 0.0);
        match k {
            RowKind::Eq => {}
            RowKind::Le => {
                row[s] = 1.0;
                s += 1;
            }
            RowKind::Ge => {
                row[s] = -1.0;
                s += 1;
            }
        }
        row.push(b);
        mat.push(row);
    }
    // row-reduce to drop dependent rows and detect inconsistency
    let rank = rref(&mut mat, total);
    for r in &mat[rank..] {
        if r[total].abs() > 1e-9 {
            return Ok(None);
        }
    }
    mat.truncate(rank);
    if total > 24 {
        return Err(Error::ResourceCap("too many columns for vertex enumeration".into()));
    }
    let mut best: Option<f64> = None;
    let cost = |j: usize| if j < n { lp.cost[j] } else { 0.0 };
    let mut cols: Vec<usize> = (0..rank).collect();
    loop {
        let mut sys: Vec<Vec<f64>> = mat.iter().map(|r| cols.iter().map(|&j| r[j]).chain(core::iter::once(r[total])).collect()).collect();
        if rref(&mut sys, rank) == rank {
            let x: Vec<f64> = (0..rank).map(|i| sys[i][rank]).collect();
            if x.iter().all(|&v| v >= -1e-9) {
                let val: f64 = cols.iter().zip(&x).map(|(&j, &v)| cost(j) * v).sum();
                if best.map_or(true, |b| val < b) {
                    best = Some(val);
                }
            }
        }
        // next rank-subset in lexicographic order
        let Some(i) = (0..rank).rev().find(|&i| cols[i] < total - rank + i) else { break };
        cols[i] += 1;
        for k in i + 1..rank {
            cols[k] = cols[k - 1] + 1;
        }
    }
    Ok(best)
}

/// Gauss-Jordan elimination with partial pivoting on the first `ncols` columns;
/// returns the rank. Pivot rows end up first, in column order.
fn rref(m: &mut [Vec<f64>], ncols: usize) -> usize {
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let (p, mag) = (r..m.len()).map(|i| (i, m[i][c].abs())).fold((r, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if mag < 1e-10 {
            continue;
        }
        m.swap(r, p);
        let piv = m[r][c];
        for v in m[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..m.len() {
            if i != r && m[i][c] != 0.0 {
                let f = m[i][c];
                let pr = m[r].clone();
                for (v, pv) in m[i].iter_mut().zip(pr) {
                    *v -= f * pv;
                }
            }
        }
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef;
    use crate::lp::{solve_lp, LpStatus};
    use crate::region::table;
    use alloc::string::String;

    #[test]
    fn cost_only_model() {
        let t = table(NodeRef::Factor(0), vec![0], vec![(vec![0], 0.7), (vec![1], 0.2), (vec![2], 0.9)]);
        let m = RegionModel::from_tables(vec![3], vec![t]).unwrap();
        let (v, a, _) = discretized_optimum(&m, 100).unwrap();
        assert_eq!((v, a), (0.2, vec![1]));
    }

    #[test]
    fn search_cap() {
        let t = table(NodeRef::Factor(0), vec![0], vec![(vec![0], 0.7), (vec![1], 0.2)]);
        let m = RegionModel::from_tables(vec![2], vec![t]).unwrap();
        assert!(matches!(discretized_optimum(&m, 1), Err(Error::ResourceCap(_))));
    }

    #[test]
    fn vertex_enumeration() {
        let mut lp = LinearProgram::new("t");
        lp.add_col(String::from("a"), 0.0, 1.0);
        lp.add_col(String::from("b"), 0.5, 1.0);
        lp.add_row(String::from("n"), RowKind::Eq, vec![(0, 1.0), (1, 1.0)], 1.0);
        assert_eq!(lp_vertex_enumerate(&lp).unwrap(), Some(0.0));
        lp.add_row(String::from("m"), RowKind::Eq, vec![(0, 1.0), (1, 1.0)], 2.0);
        assert_eq!(lp_vertex_enumerate(&lp).unwrap(), None);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn two_node_gas_inversion() {
        let net = crate::network::tests::two_node_gas(1.0);
        let gm = crate::graph::build_gm(&net, ObjectiveMode::MinCost).unwrap();
        let part = Partition::uniform(&gm, 8).unwrap();
        let r = grid_continuous(&gm, &part, &ContinuousOptions::default()).unwrap();
        assert!(r.feasible && r.residual < 1e-9, "{r:?}");
        let k = gm.coords.iter().position(|c| matches!(c.semantic, CoordSemantic::PotentialCopy { node: 1, .. })).unwrap();
        assert!((r.point[k] - 21.0).abs() < 1e-9, "{}", r.point[k]);
        assert!((r.value - 4.0).abs() < 1e-12);
        let small = ContinuousOptions { cap: 4, ..ContinuousOptions::default() };
        assert!(matches!(grid_continuous(&gm, &part, &small), Err(Error::ResourceCap(_))));
        let sampled = ContinuousOptions { cap: 4, sample: true, ..ContinuousOptions::default() };
        assert!(grid_continuous(&gm, &part, &sampled).unwrap().feasible);
    }
}
