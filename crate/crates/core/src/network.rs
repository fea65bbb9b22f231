//! The physical network: nodes with injection and potential domains, edges with
//! physics and flow domains, optional transforms and aggregators.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost::CostFunction;
use crate::interval::Interval;
use crate::physics::PhysicsKind;
use crate::{Error, Result};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    /// Number of components per potential, injection and flow vector.
    pub components: usize,
    /// Slack node ids; a valid network has exactly one.
    pub slack: Vec<NodeId>,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub aggregators: Vec<AggregatorSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    /// Injection domain per component.
    pub injection: Vec<Interval>,
    /// Potential domain per component. For a transform node this is the in-port side.
    pub potential: Vec<Interval>,
    /// Cost of the injection, applied to the first component.
    pub cost: CostFunction,
    pub transform: Option<TransformSpec>,
    /// Measured values used by the state-estimation objective.
    pub measurement: Option<NodeMeasurement>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeMeasurement {
    pub potential: Option<Vec<f64>>,
    pub injection: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSpec {
    pub from: NodeId,
    pub to: NodeId,
    pub physics: PhysicsKind,
    /// Domain of the forward flow `phi_ij` per component.
    pub flow_domain: Vec<Interval>,
    /// Domain of the reverse flow `phi_ji`; defaults to the mirror of `flow_domain`.
    pub reverse_flow_domain: Option<Vec<Interval>>,
    /// Measured forward flow used by the state-estimation objective.
    pub measured_flow: Option<Vec<f64>>,
}

impl EdgeSpec {
    pub fn reverse_domain(&self) -> Vec<Interval> {
        match &self.reverse_flow_domain {
            Some(d) => d.clone(),
            None => self.flow_domain.iter().map(|i| -*i).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    /// Neighbour on the input side.
    pub in_port: NodeId,
    /// Neighbour on the output side.
    pub out_port: NodeId,
    /// Domain of the output-side potential; defaults to the image of the input domain.
    pub out_potential: Option<Vec<Interval>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TransformKind {
    /// `pi_out = alpha * pi_in`; one real ratio for K = 1, `[re, im]` for K = 2.
    Multiplicative(Vec<f64>),
    /// Multiplicative with the ratio a decision variable (K = 1), e.g. a compressor.
    VariableRatio { domain: Interval, cost: CostFunction },
    /// `pi_out = pi_in + b` per component.
    Additive(Vec<f64>),
    /// `pi_out = T(pi_in)` by linear interpolation (K = 1).
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregatorSpec {
    pub members: Vec<NodeId>,
    pub lower: f64,
    pub upper: f64,
    pub component: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn interval_ok(i: &Interval) -> bool {
    i.lo.is_finite() && i.hi.is_finite() && i.lo <= i.hi
}

impl Network {
    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// The single slack node; `None` unless exactly one is declared.
    pub fn slack_id(&self) -> Option<NodeId> {
        match self.slack.as_slice() {
            [s] => Some(*s),
            _ => None,
        }
    }

    /// Indices of edges incident to `id`, in edge order.
    pub fn incident(&self, id: NodeId) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.from == id || e.to == id)
            .map(|(k, _)| k)
            .collect()
    }

    /// True when the undirected network graph is connected and acyclic.
    pub fn is_tree(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 || self.edges.len() + 1 != n {
            return false;
        }
        let idx: BTreeMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(k, v)| (v.id, k)).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (Some(&a), Some(&b)) = (idx.get(&e.from), idx.get(&e.to)) else {
                return false;
            };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    /// Every invariant violation, plus warnings for accepted oddities.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let k = self.components;
        let v = &mut rep.violations;
        if k == 0 {
            v.push("component count must be at least 1".into());
        }
        let mut seen = BTreeMap::new();
        for n in &self.nodes {
            if seen.insert(n.id, ()).is_some() {
                v.push(format!("duplicate node id {}", n.id));
            }
        }
        match self.slack.len() {
            1 => {
                if self.node(self.slack[0]).is_none() {
                    v.push(format!("slack node {} does not exist", self.slack[0]));
                }
            }
            0 => v.push("exactly one slack node required, found none".into()),
            m => v.push(format!("exactly one slack node required, found {m}")),
        }
        for n in &self.nodes {
            if n.injection.len() != k {
                v.push(format!("node {}: injection has {} components, expected {k}", n.id, n.injection.len()));
            }
            if n.potential.len() != k {
                v.push(format!("node {}: potential has {} components, expected {k}", n.id, n.potential.len()));
            }
            if n.injection.iter().any(|i| !interval_ok(i)) {
                v.push(format!("node {}: injection domain must be finite, nonempty and ordered", n.id));
            }
            if n.potential.iter().any(|i| !interval_ok(i)) {
                v.push(format!("node {}: potential domain must be finite, nonempty and ordered", n.id));
            }
            if self.slack.contains(&n.id) && n.potential.iter().any(|i| !i.is_point()) {
                v.push(format!("node {}: slack potential must be a singleton", n.id));
            }
            for m in n.cost.violations() {
                v.push(format!("node {}: {m}", n.id));
            }
            if !n.cost.is_convex() {
                rep.warnings.push(format!("node {}: cost is not convex", n.id));
            }
            if let Some(meas) = &n.measurement {
                for vals in [&meas.potential, &meas.injection].into_iter().flatten() {
                    if vals.len() != k || vals.iter().any(|x| !x.is_finite()) {
                        v.push(format!("node {}: measurement must have {k} finite components", n.id));
                    }
                }
            }
        }
        let mut pairs = BTreeMap::new();
        for (ei, e) in self.edges.iter().enumerate() {
            let tag = format!("edge {ei} ({}-{})", e.from, e.to);
            if self.node(e.from).is_none() || self.node(e.to).is_none() {
                v.push(format!("{tag}: dangling endpoint"));
            }
            if e.from == e.to {
                v.push(format!("{tag}: self-loop"));
            }
            let key = (e.from.min(e.to), e.from.max(e.to));
            if pairs.insert(key, ei).is_some() {
                v.push(format!("{tag}: duplicate undirected edge"));
            }
            if e.flow_domain.len() != k || e.flow_domain.iter().any(|i| !interval_ok(i)) {
                v.push(format!("{tag}: flow domain must have {k} finite, nonempty, ordered components"));
            }
            if let Some(r) = &e.reverse_flow_domain {
                if r.len() != k || r.iter().any(|i| !interval_ok(i)) {
                    v.push(format!("{tag}: reverse flow domain must have {k} finite, nonempty, ordered components"));
                }
            }
            if let Some(m) = &e.measured_flow {
                if m.len() != k || m.iter().any(|x| !x.is_finite()) {
                    v.push(format!("{tag}: measured flow must have {k} finite components"));
                }
            }
            for m in e.physics.violations() {
                v.push(format!("{tag}: {m}"));
            }
            if e.physics.components() != k {
                v.push(format!(
                    "{tag}: {} physics needs {} components, network has {k}",
                    e.physics.name(),
                    e.physics.components()
                ));
            }
        }
        for n in &self.nodes {
            let Some(t) = &n.transform else { continue };
            let nbrs: Vec<NodeId> = self
                .incident(n.id)
                .into_iter()
                .map(|e| if self.edges[e].from == n.id { self.edges[e].to } else { self.edges[e].from })
                .collect();
            if nbrs.len() != 2 {
                v.push(format!("node {}: transform node must have degree 2", n.id));
            } else if !(nbrs.contains(&t.in_port) && nbrs.contains(&t.out_port) && t.in_port != t.out_port) {
                v.push(format!("node {}: transform ports must be its two neighbours", n.id));
            }
            if self.slack.contains(&n.id) {
                v.push(format!("node {}: slack node cannot carry a transform", n.id));
            }
            if let Some(op) = &t.out_potential {
                if op.len() != k || op.iter().any(|i| !interval_ok(i)) {
                    v.push(format!("node {}: transform output potential domain invalid", n.id));
                }
            }
            match &t.kind {
                TransformKind::Multiplicative(a) => {
                    let want = if k == 2 { 2 } else { k };
                    if a.len() != want || a.iter().any(|x| !x.is_finite()) {
                        v.push(format!("node {}: multiplicative ratio must have {want} finite entries", n.id));
                    } else if k == 1 && a[0] <= 0.0 {
                        v.push(format!("node {}: multiplicative ratio must be positive", n.id));
                    } else if k == 2 && a[0] == 0.0 && a[1] == 0.0 {
                        v.push(format!("node {}: multiplicative ratio must be nonzero", n.id));
                    }
                }
                TransformKind::VariableRatio { domain, cost } => {
                    if k != 1 {
                        v.push(format!("node {}: variable ratio needs one component", n.id));
                    }
                    if !interval_ok(domain) || domain.lo <= 0.0 {
                        v.push(format!("node {}: ratio domain must be finite and positive", n.id));
                    }
                    for m in cost.violations() {
                        v.push(format!("node {}: ratio {m}", n.id));
                    }
                }
                TransformKind::Additive(b) => {
                    if b.len() != k || b.iter().any(|x| !x.is_finite()) {
                        v.push(format!("node {}: additive offset must have {k} finite entries", n.id));
                    }
                }
                TransformKind::Tabulated { x, y } => {
                    if k != 1 {
                        v.push(format!("node {}: tabulated transform needs one component", n.id));
                    }
                    if x.len() < 2 || x.len() != y.len() || x.windows(2).any(|w| w[0] >= w[1]) {
                        v.push(format!("node {}: tabulated transform needs increasing abscissae", n.id));
                    }
                }
            }
        }
        for (a, g) in self.aggregators.iter().enumerate() {
            if g.members.len() < 2 {
                v.push(format!("aggregator {a}: needs at least two members"));
            }
            if !(g.lower >= 0.0 && g.lower <= g.upper) || g.lower.is_nan() {
                v.push(format!("aggregator {a}: bounds must satisfy 0 <= lower <= upper"));
            }
            if g.component >= k {
                v.push(format!("aggregator {a}: component out of range"));
            }
            for m in &g.members {
                if self.node(*m).is_none() {
                    v.push(format!("aggregator {a}: member {m} does not exist"));
                } else if self.slack.contains(m) {
                    v.push(format!("aggregator {a}: slack node {m} has no injection variable"));
                }
            }
        }
        rep
    }

    /// Domain of the potential seen by edges at the output port of a transform node.
    pub fn transform_out_domain(&self, node: &NodeSpec) -> Vec<Interval> {
        let Some(t) = &node.transform else {
            return node.potential.clone();
        };
        if let Some(d) = &t.out_potential {
            return d.clone();
        }
        transform_enclosure(&t.kind, &node.potential)
    }
}

/// Enclosure of the transform image of a potential box.
pub fn transform_enclosure(kind: &TransformKind, b: &[Interval]) -> Vec<Interval> {
    match kind {
        TransformKind::Multiplicative(a) if b.len() == 1 => vec![b[0].scale(a[0])],
        TransformKind::Multiplicative(a) => {
            let (ar, ai) = (Interval::point(a[0]), Interval::point(a[1]));
            vec![ar * b[0] - ai * b[1], ar * b[1] + ai * b[0]]
        }
        TransformKind::VariableRatio { domain, .. } => vec![*domain * b[0]],
        TransformKind::Additive(o) => b.iter().zip(o).map(|(i, c)| i.add_scalar(*c)).collect(),
        TransformKind::Tabulated { x, y } => vec![crate::physics::table_range(x, y, b[0])],
    }
}

/// Output potential of a transform. `ratio` supplies the value of a variable ratio.
pub fn apply_transform(kind: &TransformKind, pi_in: &[f64], ratio: Option<f64>) -> Result<Vec<f64>> {
    if pi_in.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("potential"));
    }
    match kind {
        TransformKind::Multiplicative(a) if pi_in.len() == 1 => {
            if a[0] <= 0.0 {
                return Err(Error::InvalidArgument("multiplicative ratio must be positive".into()));
            }
            Ok(vec![a[0] * pi_in[0]])
        }
        TransformKind::Multiplicative(a) => {
            let (e, f) = (pi_in[0], pi_in[1]);
            Ok(vec![a[0] * e - a[1] * f, a[0] * f + a[1] * e])
        }
        TransformKind::VariableRatio { .. } => {
            let a = ratio.ok_or_else(|| Error::InvalidArgument("variable ratio needs a value".into()))?;
            if a <= 0.0 {
                return Err(Error::InvalidArgument("multiplicative ratio must be positive".into()));
            }
            Ok(vec![a * pi_in[0]])
        }
        TransformKind::Additive(b) => Ok(pi_in.iter().zip(b).map(|(p, c)| p + c).collect()),
        TransformKind::Tabulated { x, y } => {
            let k = crate::cost::segment(x, pi_in[0]);
            Ok(vec![y[k] + (pi_in[0] - x[k]) * ((y[k + 1] - y[k]) / (x[k + 1] - x[k]))])
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_node_gas(gamma: f64) -> Network {
        Network {
            components: 1,
            slack: vec![0],
            nodes: vec![
                NodeSpec {
                    id: 0,
                    injection: vec![Interval::new(-10.0, 10.0)],
                    potential: vec![Interval::point(25.0)],
                    cost: CostFunction::zero(),
                    transform: None,
                    measurement: None,
                },
                NodeSpec {
                    id: 1,
                    injection: vec![Interval::point(-2.0)],
                    potential: vec![Interval::new(0.0, 25.0)],
                    cost: CostFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 },
                    transform: None,
                    measurement: None,
                },
            ],
            edges: vec![EdgeSpec {
                from: 0,
                to: 1,
                physics: PhysicsKind::Gas { gamma, offset: 0.0 },
                flow_domain: vec![Interval::new(-5.0, 5.0)],
                reverse_flow_domain: None,
                measured_flow: None,
            }],
            aggregators: vec![],
        }
    }

    #[test]
    fn valid_two_node_net() {
        let rep = two_node_gas(1.0).validate();
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn zero_conductance_is_reported() {
        let rep = two_node_gas(0.0).validate();
        assert!(rep.violations.iter().any(|m| m.contains("gas conductance must be positive")));
    }

    #[test]
    fn two_slacks_are_reported() {
        let mut n = two_node_gas(1.0);
        n.slack = vec![0, 1];
        let rep = n.validate();
        assert!(rep.violations.iter().any(|m| m.contains("exactly one slack")));
    }

    #[test]
    fn structural_problems_are_all_listed() {
        let mut n = two_node_gas(1.0);
        n.edges.push(n.edges[0].clone());
        n.edges.push(EdgeSpec { from: 1, to: 1, ..n.edges[0].clone() });
        n.edges.push(EdgeSpec { from: 1, to: 7, ..n.edges[0].clone() });
        n.nodes[1].potential = vec![Interval { lo: 3.0, hi: 1.0 }];
        let rep = n.validate();
        let all = rep.violations.join("\n");
        for needle in ["duplicate undirected edge", "self-loop", "dangling endpoint", "potential domain"] {
            assert!(all.contains(needle), "missing {needle} in {all}");
        }
    }

    #[test]
    fn transforms() {
        let m = TransformKind::Multiplicative(vec![1.2]);
        assert!((apply_transform(&m, &[25.0], None).unwrap()[0] - 30.0).abs() < 1e-12);
        let id = TransformKind::Multiplicative(vec![1.0]);
        assert_eq!(apply_transform(&id, &[7.5], None).unwrap(), vec![7.5]);
        assert!(apply_transform(&TransformKind::Multiplicative(vec![-1.0]), &[1.0], None).is_err());
        let th: f64 = 0.7;
        let ps = TransformKind::Multiplicative(vec![libm::cos(th), libm::sin(th)]);
        let out = apply_transform(&ps, &[1.1, -0.3], None).unwrap();
        let m_in = libm::hypot(1.1, -0.3);
        let m_out = libm::hypot(out[0], out[1]);
        assert!((m_in - m_out).abs() < 1e-12);
    }

    #[test]
    fn tree_detection() {
        let mut n = two_node_gas(1.0);
        assert!(n.is_tree());
        n.nodes.push(NodeSpec { id: 2, ..n.nodes[1].clone() });
        n.edges.push(EdgeSpec { from: 1, to: 2, ..n.edges[0].clone() });
        n.edges.push(EdgeSpec { from: 2, to: 0, ..n.edges[0].clone() });
        assert!(!n.is_tree());
    }
}
