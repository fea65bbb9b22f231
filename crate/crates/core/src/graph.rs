//! The bipartite graphical model built from a network.
//!
//! Variables are clusters of scalar coordinates. An edge end `s_ij` carries the
//! potential copy `pi_ij` and the directed flow `phi_ij` (one of each per
//! component), an injection variable carries `q_i`. Grouping the two quantities of
//! an edge end keeps the graph of a radial network acyclic: the node law and the
//! edge law meet in exactly one variable per edge end.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::cost::{CostFunction, FactorFn};
use crate::interval::Interval;
use crate::network::{Network, NodeId, TransformKind};
use crate::physics::{Direction, PhysicsKind};
use crate::relation::Relation;
use crate::{Error, Result};

pub type VarId = usize;
pub type CoordId = usize;
pub type FactorId = usize;
pub type ConstraintId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Sum of node injection costs.
    MinCost,
    /// Active line losses of an AC network.
    DistributionLoss,
    /// Injection costs plus compression costs of variable-ratio compressors.
    OptimalGas,
    /// L1 conservation residual with measured quantities fixed.
    StateEstimation,
}

impl ObjectiveMode {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveMode::MinCost => "min-cost",
            ObjectiveMode::DistributionLoss => "distribution-loss",
            ObjectiveMode::OptimalGas => "optimal-gas",
            ObjectiveMode::StateEstimation => "state-estimation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoordSemantic {
    PotentialCopy { node: NodeId, edge: usize, component: usize },
    Flow { edge: usize, from: NodeId, to: NodeId, component: usize },
    Injection { node: NodeId, component: usize },
    Ratio { node: NodeId },
    Generic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coord {
    pub var: VarId,
    pub name: String,
    pub semantic: CoordSemantic,
    pub domain: Interval,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VarKind {
    EdgeEnd { node: NodeId, edge: usize },
    Injection { node: NodeId },
    Ratio { node: NodeId },
    Generic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub coords: Vec<CoordId>,
}

/// A relation applied to an ordered list of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub relation: Relation,
    pub coords: Vec<CoordId>,
}

/// A valued term evaluated on the tuples of the constraint node carrying it.
#[derive(Clone, Debug, PartialEq)]
pub struct AttachedCost {
    pub func: FactorFn,
    pub args: Vec<CoordId>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    NodeLaw { node: NodeId },
    EdgeLaw { edge: usize },
    Aggregator,
    Generic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintNode {
    pub kind: ConstraintKind,
    /// Sorted variable ids.
    pub scope: Vec<VarId>,
    pub blocks: Vec<Block>,
    pub costs: Vec<AttachedCost>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostFactor {
    pub func: FactorFn,
    pub args: Vec<CoordId>,
    /// Sorted variable ids owning `args`.
    pub scope: Vec<VarId>,
}

/// A factor or constraint node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Factor(FactorId),
    Constraint(ConstraintId),
}

impl NodeRef {
    pub fn tag(&self) -> String {
        match self {
            NodeRef::Factor(f) => format!("f{f}"),
            NodeRef::Constraint(c) => format!("c{c}"),
        }
    }
}

/// Network and objective a graph was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Origin {
    pub network: Network,
    pub objective: ObjectiveMode,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FactorGraph {
    pub vars: Vec<Variable>,
    pub coords: Vec<Coord>,
    pub factors: Vec<CostFactor>,
    pub constraints: Vec<ConstraintNode>,
    pub origin: Option<Origin>,
}

fn sorted_scope(gm: &FactorGraph, coords: impl IntoIterator<Item = CoordId>) -> Vec<VarId> {
    let mut s: Vec<VarId> = coords.into_iter().map(|c| gm.coords[c].var).collect();
    s.sort_unstable();
    s.dedup();
    s
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with one coordinate per `(name, domain)` pair.
    pub fn add_variable(&mut self, name: &str, coords: &[(&str, Interval)]) -> VarId {
        self.push_variable(
            String::from(name),
            VarKind::Generic,
            coords.iter().map(|(n, d)| (String::from(*n), CoordSemantic::Generic, *d)).collect(),
        )
    }

    fn push_variable(&mut self, name: String, kind: VarKind, coords: Vec<(String, CoordSemantic, Interval)>) -> VarId {
        let v = self.vars.len();
        let mut ids = Vec::with_capacity(coords.len());
        for (n, s, d) in coords {
            ids.push(self.coords.len());
            self.coords.push(Coord { var: v, name: n, semantic: s, domain: d });
        }
        self.vars.push(Variable { name, kind, coords: ids });
        v
    }

    pub fn add_cost_factor(&mut self, func: FactorFn, args: Vec<CoordId>) -> Result<FactorId> {
        if func.arity() != Some(args.len()) {
            return Err(Error::InvalidArgument(format!("{} factor expects {:?} arguments", func.name(), func.arity())));
        }
        self.check_coords(&args)?;
        let scope = sorted_scope(self, args.iter().copied());
        self.factors.push(CostFactor { func, args, scope });
        Ok(self.factors.len() - 1)
    }

    /// Adds a constraint node. Its scope is every variable touched by a block or an
    /// attached cost, plus `extra` (variables constrained only by their domain).
    pub fn add_constraint(
        &mut self,
        kind: ConstraintKind,
        blocks: Vec<Block>,
        costs: Vec<AttachedCost>,
        extra: &[VarId],
    ) -> Result<ConstraintId> {
        for b in &blocks {
            if let Some(a) = b.relation.arity() {
                if a != b.coords.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} block expects {a} coordinates, got {}",
                        b.relation.name(),
                        b.coords.len()
                    )));
                }
            }
            self.check_coords(&b.coords)?;
        }
        for c in &costs {
            if c.func.arity() != Some(c.args.len()) {
                return Err(Error::InvalidArgument(format!("{} term has wrong arity", c.func.name())));
            }
            self.check_coords(&c.args)?;
        }
        let mut all: Vec<CoordId> = blocks.iter().flat_map(|b| b.coords.iter().copied()).collect();
        all.extend(costs.iter().flat_map(|c| c.args.iter().copied()));
        let mut scope = sorted_scope(self, all);
        scope.extend_from_slice(extra);
        scope.sort_unstable();
        scope.dedup();
        if scope.is_empty() {
            return Err(Error::InvalidArgument("constraint without variables".into()));
        }
        if let Some(&v) = scope.iter().find(|&&v| v >= self.vars.len()) {
            return Err(Error::InvalidArgument(format!("unknown variable {v}")));
        }
        self.constraints.push(ConstraintNode { kind, scope, blocks, costs });
        Ok(self.constraints.len() - 1)
    }

    fn check_coords(&self, c: &[CoordId]) -> Result<()> {
        match c.iter().find(|&&x| x >= self.coords.len()) {
            Some(x) => Err(Error::InvalidArgument(format!("unknown coordinate {x}"))),
            None => Ok(()),
        }
    }

    pub fn node_scope(&self, n: NodeRef) -> &[VarId] {
        match n {
            NodeRef::Factor(f) => &self.factors[f].scope,
            NodeRef::Constraint(c) => &self.constraints[c].scope,
        }
    }

    /// Factor nodes first, then constraint nodes, each in id order.
    pub fn function_nodes(&self) -> impl Iterator<Item = NodeRef> + '_ {
        (0..self.factors.len())
            .map(NodeRef::Factor)
            .chain((0..self.constraints.len()).map(NodeRef::Constraint))
    }

    /// Function nodes adjacent to each variable, in `function_nodes` order.
    pub fn adjacency(&self) -> Vec<Vec<NodeRef>> {
        let mut adj = vec![Vec::new(); self.vars.len()];
        for n in self.function_nodes() {
            for &v in self.node_scope(n) {
                adj[v].push(n);
            }
        }
        adj
    }

    /// True iff the bipartite graph has no cycle (every component is a tree).
    pub fn is_tree(&self) -> bool {
        let adj = self.adjacency();
        let nf = self.factors.len();
        let fidx = |n: NodeRef| match n {
            NodeRef::Factor(f) => f,
            NodeRef::Constraint(c) => nf + c,
        };
        let nv = self.vars.len();
        let mut seen_v = vec![false; nv];
        let mut seen_f = vec![false; nf + self.constraints.len()];
        for start in 0..nv {
            if seen_v[start] {
                continue;
            }
            // iterative DFS on (vertex, parent) pairs; revisiting a vertex means a cycle
            seen_v[start] = true;
            let mut stack: Vec<(bool, usize, Option<usize>)> = vec![(true, start, None)];
            while let Some((is_var, id, parent)) = stack.pop() {
                if is_var {
                    for &n in &adj[id] {
                        let f = fidx(n);
                        if Some(f) == parent {
                            continue;
                        }
                        if seen_f[f] {
                            return false;
                        }
                        seen_f[f] = true;
                        stack.push((false, f, Some(id)));
                    }
                } else {
                    let n = if id < nf { NodeRef::Factor(id) } else { NodeRef::Constraint(id - nf) };
                    for &v in self.node_scope(n) {
                        if Some(v) == parent {
                            continue;
                        }
                        if seen_v[v] {
                            return false;
                        }
                        seen_v[v] = true;
                        stack.push((true, v, Some(id)));
                    }
                }
            }
        }
        true
    }

    /// Copy with coordinate domains replaced (e.g. by tightened bounds).
    pub fn with_domains(&self, domains: &[Interval]) -> Result<FactorGraph> {
        if domains.len() != self.coords.len() {
            return Err(Error::InvalidArgument("one domain per coordinate required".into()));
        }
        let mut g = self.clone();
        for (c, d) in g.coords.iter_mut().zip(domains) {
            c.domain = *d;
        }
        Ok(g)
    }

    pub fn domains(&self) -> Vec<Interval> {
        self.coords.iter().map(|c| c.domain).collect()
    }

    /// Largest block residual at a point with one value per coordinate.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut r = 0.0f64;
        let mut buf = Vec::new();
        for c in &self.constraints {
            for b in &c.blocks {
                buf.clear();
                buf.extend(b.coords.iter().map(|&k| x[k]));
                r = r.max(b.relation.residual(&buf));
            }
        }
        for (k, c) in self.coords.iter().enumerate() {
            r = r.max(c.domain.distance(x[k]));
        }
        r
    }

    /// Objective at a point: cost factors plus attached costs.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let mut buf = Vec::new();
        let mut total = 0.0;
        for f in &self.factors {
            buf.clear();
            buf.extend(f.args.iter().map(|&k| x[k]));
            total += f.func.eval(&buf);
        }
        for c in &self.constraints {
            for a in &c.costs {
                buf.clear();
                buf.extend(a.args.iter().map(|&k| x[k]));
                total += a.func.eval(&buf);
            }
        }
        total
    }

    /// Adds `lower <= |sum of q_i^(component)| <= upper` over the member nodes.
    pub fn add_aggregator(&mut self, members: &[NodeId], lower: f64, upper: f64, component: usize) -> Result<ConstraintId> {
        if !(lower >= 0.0) || !(lower <= upper) {
            return Err(Error::InvalidArgument("aggregator bounds must satisfy 0 <= lower <= upper".into()));
        }
        if members.len() < 2 {
            return Err(Error::InvalidArgument("aggregator needs at least two members".into()));
        }
        let mut coords = Vec::new();
        for &m in members {
            let c = self
                .coords
                .iter()
                .position(|c| c.semantic == CoordSemantic::Injection { node: m, component })
                .ok_or_else(|| Error::InvalidArgument(format!("node {m} has no injection variable for component {component}")))?;
            coords.push(c);
        }
        self.add_constraint(
            ConstraintKind::Aggregator,
            vec![Block { relation: Relation::AbsSumBand { lower, upper }, coords }],
            vec![],
            &[],
        )
    }

    /// Line-oriented text listing, sorted by id.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "gm vars={} coords={} factors={} constraints={}", self.vars.len(), self.coords.len(), self.factors.len(), self.constraints.len());
        for (v, var) in self.vars.iter().enumerate() {
            let _ = writeln!(s, "var v{v} {}", var.name);
            for &c in &var.coords {
                let co = &self.coords[c];
                let _ = writeln!(s, "  coord x{c} {} [{}, {}]", co.name, co.domain.lo, co.domain.hi);
            }
        }
        let coord_list = |cs: &[CoordId]| cs.iter().map(|c| format!("x{c}")).collect::<Vec<_>>().join(",");
        let scope_list = |vs: &[VarId]| vs.iter().map(|v| format!("v{v}")).collect::<Vec<_>>().join(",");
        for (f, fac) in self.factors.iter().enumerate() {
            let _ = writeln!(s, "factor f{f} {} scope={} args={}", fac.func.name(), scope_list(&fac.scope), coord_list(&fac.args));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let kind = match &c.kind {
                ConstraintKind::NodeLaw { node } => format!("node-law({node})"),
                ConstraintKind::EdgeLaw { edge } => format!("edge-law({edge})"),
                ConstraintKind::Aggregator => String::from("aggregator"),
                ConstraintKind::Generic => String::from("generic"),
            };
            let _ = writeln!(s, "constraint c{k} {kind} scope={}", scope_list(&c.scope));
            for b in &c.blocks {
                let _ = writeln!(s, "  block {} {}", b.relation.name(), coord_list(&b.coords));
            }
            for a in &c.costs {
                let _ = writeln!(s, "  cost {} {}", a.func.name(), coord_list(&a.args));
            }
        }
        s
    }

    /// Maps a network state to a coordinate point: potentials per node (input side
    /// for transforms), optional ratio per node, injections computed from flows.
    pub fn point_from_state(&self, potentials: &BTreeMap<NodeId, Vec<f64>>, ratios: &BTreeMap<NodeId, f64>) -> Result<Vec<f64>> {
        let origin = self.origin.as_ref().ok_or_else(|| Error::Unsupported("graph has no network origin".into()))?;
        let net = &origin.network;
        let seen = |node: NodeId, edge: usize| -> Result<Vec<f64>> {
            let n = net.node(node).ok_or_else(|| Error::InvalidArgument(format!("unknown node {node}")))?;
            let p = potentials.get(&node).ok_or_else(|| Error::InvalidArgument(format!("missing potential of node {node}")))?;
            let e = &net.edges[edge];
            let other = if e.from == node { e.to } else { e.from };
            match &n.transform {
                Some(t) if t.out_port == other => crate::network::apply_transform(&t.kind, p, ratios.get(&node).copied()),
                _ => Ok(p.clone()),
            }
        };
        let mut x = vec![f64::NAN; self.coords.len()];
        let mut inj: BTreeMap<(NodeId, usize), f64> = BTreeMap::new();
        for (ei, e) in net.edges.iter().enumerate() {
            let pi = seen(e.from, ei)?;
            let pj = seen(e.to, ei)?;
            let fwd = e.physics.flow(&pi, &pj, Direction::Forward)?;
            let rev = e.physics.flow(&pi, &pj, Direction::Reverse)?;
            for c in 0..net.components {
                *inj.entry((e.from, c)).or_insert(0.0) += fwd[c];
                *inj.entry((e.to, c)).or_insert(0.0) += rev[c];
            }
            for (k, co) in self.coords.iter().enumerate() {
                match co.semantic {
                    CoordSemantic::PotentialCopy { node, edge, component } if edge == ei => {
                        x[k] = if node == e.from { pi[component] } else { pj[component] };
                    }
                    CoordSemantic::Flow { edge, from, component, .. } if edge == ei => {
                        x[k] = if from == e.from { fwd[component] } else { rev[component] };
                    }
                    _ => {}
                }
            }
        }
        for (k, co) in self.coords.iter().enumerate() {
            match co.semantic {
                CoordSemantic::Injection { node, component } => x[k] = inj.get(&(node, component)).copied().unwrap_or(0.0),
                CoordSemantic::Ratio { node } => {
                    x[k] = *ratios.get(&node).ok_or_else(|| Error::InvalidArgument(format!("missing ratio of node {node}")))?;
                }
                _ => {}
            }
        }
        Ok(x)
    }
}

fn comp_name(base: String, k: usize, kk: usize) -> String {
    if kk == 1 {
        base
    } else {
        format!("{base}.{k}")
    }
}

/// Builds the graphical model of a validated network.
pub fn build_gm(net: &Network, objective: ObjectiveMode) -> Result<FactorGraph> {
    let rep = net.validate();
    if !rep.is_ok() {
        return Err(Error::InvalidNetwork(rep.violations));
    }
    let kk = net.components;
    let slack = net.slack_id().expect("validated");
    for e in &net.edges {
        let ok = match objective {
            ObjectiveMode::DistributionLoss => {
                matches!(e.physics, PhysicsKind::AcPowerVoltage { .. } | PhysicsKind::AcCurrentVoltage { .. })
            }
            ObjectiveMode::OptimalGas => matches!(e.physics, PhysicsKind::Gas { .. }),
            _ => true,
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "objective/physics combination: {} with {}",
                objective.name(),
                e.physics.name()
            )));
        }
    }
    let se = objective == ObjectiveMode::StateEstimation;
    let mut gm = FactorGraph::new();

    // injection variables
    let mut q_var: BTreeMap<NodeId, VarId> = BTreeMap::new();
    for n in &net.nodes {
        if n.id == slack {
            continue;
        }
        let meas = if se { n.measurement.as_ref().and_then(|m| m.injection.clone()) } else { None };
        let coords = (0..kk)
            .map(|c| {
                let d = match &meas {
                    Some(m) => Interval::point(m[c]),
                    None => n.injection[c],
                };
                (comp_name(format!("q{}", n.id), c, kk), CoordSemantic::Injection { node: n.id, component: c }, d)
            })
            .collect();
        q_var.insert(n.id, gm.push_variable(format!("q{}", n.id), VarKind::Injection { node: n.id }, coords));
    }

    // edge-end variables
    let mut end_var: BTreeMap<(usize, NodeId), VarId> = BTreeMap::new();
    for (ei, e) in net.edges.iter().enumerate() {
        for (node, other) in [(e.from, e.to), (e.to, e.from)] {
            let spec = net.node(node).expect("validated");
            let pot = match &spec.transform {
                Some(t) if t.out_port == other => net.transform_out_domain(spec),
                _ => spec.potential.clone(),
            };
            let meas_pot = if se { spec.measurement.as_ref().and_then(|m| m.potential.clone()) } else { None };
            let flow = if node == e.from { e.flow_domain.clone() } else { e.reverse_domain() };
            let meas_flow = if se {
                e.measured_flow.as_ref().and_then(|m| {
                    if node == e.from {
                        Some(m.clone())
                    } else if e.physics.is_antisymmetric() {
                        Some(m.iter().map(|v| -v).collect())
                    } else {
                        None
                    }
                })
            } else {
                None
            };
            let mut coords = Vec::new();
            for c in 0..kk {
                let d = match (&meas_pot, &spec.transform) {
                    (Some(m), None) => Interval::point(m[c]),
                    _ => pot[c],
                };
                coords.push((
                    comp_name(format!("pi{node}_{other}"), c, kk),
                    CoordSemantic::PotentialCopy { node, edge: ei, component: c },
                    d,
                ));
            }
            for c in 0..kk {
                let d = match &meas_flow {
                    Some(m) => Interval::point(m[c]),
                    None => flow[c],
                };
                coords.push((
                    comp_name(format!("phi{node}_{other}"), c, kk),
                    CoordSemantic::Flow { edge: ei, from: node, to: other, component: c },
                    d,
                ));
            }
            let v = gm.push_variable(format!("s{node}_{other}"), VarKind::EdgeEnd { node, edge: ei }, coords);
            end_var.insert((ei, node), v);
        }
    }

    // ratio variables
    let mut ratio_var: BTreeMap<NodeId, VarId> = BTreeMap::new();
    for n in &net.nodes {
        if let Some(t) = &n.transform {
            if let TransformKind::VariableRatio { domain, .. } = &t.kind {
                let v = gm.push_variable(
                    format!("a{}", n.id),
                    VarKind::Ratio { node: n.id },
                    vec![(format!("alpha{}", n.id), CoordSemantic::Ratio { node: n.id }, *domain)],
                );
                ratio_var.insert(n.id, v);
            }
        }
    }

    let pi_coord = |gm: &FactorGraph, v: VarId, c: usize| gm.vars[v].coords[c];
    let phi_coord = |gm: &FactorGraph, v: VarId, c: usize| gm.vars[v].coords[kk + c];

    // node laws
    for n in &net.nodes {
        let inc = net.incident(n.id);
        let ends: Vec<VarId> = inc.iter().map(|&e| end_var[&(e, n.id)]).collect();
        let mut blocks = Vec::new();
        let mut costs = Vec::new();
        match &n.transform {
            Some(t) => {
                let in_edge = inc.iter().position(|&e| net.edges[e].from == t.in_port || net.edges[e].to == t.in_port).expect("validated");
                let out_edge = 1 - in_edge;
                let mut coords: Vec<CoordId> = (0..kk).map(|c| pi_coord(&gm, ends[in_edge], c)).collect();
                coords.extend((0..kk).map(|c| pi_coord(&gm, ends[out_edge], c)));
                if let Some(&rv) = ratio_var.get(&n.id) {
                    coords.push(gm.vars[rv].coords[0]);
                }
                blocks.push(Block { relation: Relation::Transform { kind: t.kind.clone(), components: kk }, coords });
            }
            None if ends.len() >= 2 => {
                for c in 0..kk {
                    blocks.push(Block { relation: Relation::Equal, coords: ends.iter().map(|&v| pi_coord(&gm, v, c)).collect() });
                }
            }
            None => {}
        }
        if let Some(&qv) = q_var.get(&n.id) {
            for c in 0..kk {
                let mut coords = vec![gm.vars[qv].coords[c]];
                coords.extend(ends.iter().map(|&v| phi_coord(&gm, v, c)));
                let mut coeffs = vec![1.0];
                coeffs.extend(core::iter::repeat(-1.0).take(ends.len()));
                if se {
                    costs.push(AttachedCost { func: FactorFn::AbsResidual { coeffs, target: 0.0, weight: 1.0 }, args: coords });
                } else {
                    blocks.push(Block { relation: Relation::Linear { coeffs, rhs: 0.0 }, coords });
                }
            }
            let current = inc.iter().any(|&e| matches!(net.edges[e].physics, PhysicsKind::AcCurrentVoltage { .. }));
            if objective == ObjectiveMode::MinCost && current {
                let v0 = ends[0];
                let args = vec![pi_coord(&gm, v0, 0), pi_coord(&gm, v0, 1), gm.vars[qv].coords[0], gm.vars[qv].coords[1]];
                costs.push(AttachedCost { func: FactorFn::InjectionPower(n.cost.clone()), args });
            }
        }
        let mut extra = ends.clone();
        if let Some(&qv) = q_var.get(&n.id) {
            extra.push(qv);
        }
        if let Some(&rv) = ratio_var.get(&n.id) {
            extra.push(rv);
        }
        gm.add_constraint(ConstraintKind::NodeLaw { node: n.id }, blocks, costs, &extra)?;
    }

    // edge laws
    for (ei, e) in net.edges.iter().enumerate() {
        let (a, b) = (end_var[&(ei, e.from)], end_var[&(ei, e.to)]);
        let mut coords: Vec<CoordId> = (0..kk).map(|c| pi_coord(&gm, a, c)).collect();
        coords.extend((0..kk).map(|c| pi_coord(&gm, b, c)));
        coords.extend((0..kk).map(|c| phi_coord(&gm, a, c)));
        coords.extend((0..kk).map(|c| phi_coord(&gm, b, c)));
        let mut costs = Vec::new();
        if objective == ObjectiveMode::DistributionLoss {
            if let PhysicsKind::AcPowerVoltage { r, x } | PhysicsKind::AcCurrentVoltage { r, x } = e.physics {
                let args = vec![pi_coord(&gm, a, 0), pi_coord(&gm, a, 1), pi_coord(&gm, b, 0), pi_coord(&gm, b, 1)];
                costs.push(AttachedCost { func: FactorFn::LineLoss { r, x }, args });
            }
        }
        gm.add_constraint(
            ConstraintKind::EdgeLaw { edge: ei },
            vec![Block { relation: Relation::Edge { physics: e.physics.clone() }, coords }],
            costs,
            &[a, b],
        )?;
    }

    // cost factors
    if matches!(objective, ObjectiveMode::MinCost | ObjectiveMode::OptimalGas) {
        for n in &net.nodes {
            let Some(&qv) = q_var.get(&n.id) else { continue };
            let current = net
                .incident(n.id)
                .iter()
                .any(|&e| matches!(net.edges[e].physics, PhysicsKind::AcCurrentVoltage { .. }));
            if current && objective == ObjectiveMode::MinCost {
                continue;
            }
            gm.add_cost_factor(FactorFn::Cost(n.cost.clone()), vec![gm.vars[qv].coords[0]])?;
        }
    }
    if objective == ObjectiveMode::OptimalGas {
        for n in &net.nodes {
            if let (Some(&rv), Some(t)) = (ratio_var.get(&n.id), &n.transform) {
                if let TransformKind::VariableRatio { cost, .. } = &t.kind {
                    if !cost.is_zero() {
                        gm.add_cost_factor(FactorFn::Cost(cost.clone()), vec![gm.vars[rv].coords[0]])?;
                    }
                }
            }
        }
    }

    for g in &net.aggregators {
        gm.add_aggregator(&g.members, g.lower, g.upper, g.component)?;
    }
    gm.origin = Some(Origin { network: net.clone(), objective });
    Ok(gm)
}

/// Zero cost, for callers that need a placeholder.
pub fn zero_cost() -> FactorFn {
    FactorFn::Cost(CostFunction::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeSpec, NodeSpec};

    fn node(id: NodeId, pot: Interval) -> NodeSpec {
        NodeSpec {
            id,
            injection: vec![Interval::new(-5.0, 5.0)],
            potential: vec![pot],
            cost: CostFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 },
            transform: None,
            measurement: None,
        }
    }

    fn edge(from: NodeId, to: NodeId) -> EdgeSpec {
        EdgeSpec {
            from,
            to,
            physics: PhysicsKind::Gas { gamma: 1.0, offset: 0.0 },
            flow_domain: vec![Interval::new(-5.0, 5.0)],
            reverse_flow_domain: None,
            measured_flow: None,
        }
    }

    fn net(n: u32, edges: &[(u32, u32)]) -> Network {
        let mut nodes = vec![node(0, Interval::point(25.0))];
        nodes.extend((1..n).map(|i| node(i, Interval::new(0.0, 25.0))));
        Network { components: 1, slack: vec![0], nodes, edges: edges.iter().map(|&(a, b)| edge(a, b)).collect(), aggregators: vec![] }
    }

    #[test]
    fn two_node_counts() {
        let gm = build_gm(&net(2, &[(0, 1)]), ObjectiveMode::MinCost).unwrap();
        assert_eq!(gm.coords.len(), 5);
        let names: Vec<&str> = gm.coords.iter().map(|c| c.name.as_str()).collect();
        for n in ["q1", "pi0_1", "pi1_0", "phi0_1", "phi1_0"] {
            assert!(names.contains(&n), "{names:?}");
        }
        let node_laws = gm.constraints.iter().filter(|c| matches!(c.kind, ConstraintKind::NodeLaw { .. })).count();
        let edge_laws = gm.constraints.iter().filter(|c| matches!(c.kind, ConstraintKind::EdgeLaw { .. })).count();
        assert_eq!((node_laws, edge_laws, gm.factors.len()), (2, 1, 1));
        assert!(gm.is_tree());
    }

    #[test]
    fn star_center_arity() {
        let spokes = 5u32;
        let edges: Vec<(u32, u32)> = (1..=spokes).map(|k| (0, k)).collect();
        let mut nt = net(spokes + 1, &edges);
        // make the centre a regular node so it has an injection
        nt.slack = vec![1];
        nt.nodes[0].potential = vec![Interval::new(0.0, 30.0)];
        nt.nodes[1].potential = vec![Interval::point(20.0)];
        let gm = build_gm(&nt, ObjectiveMode::MinCost).unwrap();
        let c = gm.constraints.iter().find(|c| c.kind == ConstraintKind::NodeLaw { node: 0 }).unwrap();
        let coords: usize = c.scope.iter().map(|&v| gm.vars[v].coords.len()).sum();
        assert_eq!(coords, 2 * spokes as usize + 1);
        assert!(gm.is_tree());
    }

    #[test]
    fn triangle_is_loopy() {
        let gm = build_gm(&net(3, &[(0, 1), (1, 2), (2, 0)]), ObjectiveMode::MinCost).unwrap();
        assert!(!gm.is_tree());
    }

    #[test]
    fn unsupported_objective_pair() {
        let e = build_gm(&net(2, &[(0, 1)]), ObjectiveMode::DistributionLoss).unwrap_err();
        assert!(matches!(e, Error::Unsupported(m) if m.contains("distribution-loss with gas")));
    }

    #[test]
    fn aggregator_bounds() {
        let mut gm = build_gm(&net(3, &[(0, 1), (0, 2)]), ObjectiveMode::MinCost).unwrap();
        assert!(gm.add_aggregator(&[1, 2], 2.0, 1.0, 0).is_err());
        assert!(gm.add_aggregator(&[1, 2], -1.0, 1.0, 0).is_err());
        assert!(gm.add_aggregator(&[0, 1], 0.0, 1.0, 0).is_err());
        assert!(gm.add_aggregator(&[1, 2], 0.0, 10.0, 0).is_ok());
    }

    #[test]
    fn dump_is_stable() {
        let gm = build_gm(&net(2, &[(0, 1)]), ObjectiveMode::MinCost).unwrap();
        let d = gm.dump();
        assert_eq!(d, gm.clone().dump());
        assert!(d.starts_with("gm vars=3 coords=5 factors=1 constraints=3\n"));
    }

    #[test]
    fn feasible_state_has_zero_residual() {
        let gm = build_gm(&net(3, &[(0, 1), (1, 2)]), ObjectiveMode::MinCost).unwrap();
        let mut pot = BTreeMap::new();
        pot.insert(0, vec![25.0]);
        pot.insert(1, vec![21.0]);
        pot.insert(2, vec![20.0]);
        let x = gm.point_from_state(&pot, &BTreeMap::new()).unwrap();
        assert!(gm.max_residual(&x) < 1e-12);
        let mut y = x.clone();
        let phi = gm.coords.iter().position(|c| c.name == "phi1_2").unwrap();
        y[phi] += 0.1;
        assert!(gm.max_residual(&y) > 0.05);
    }
}
