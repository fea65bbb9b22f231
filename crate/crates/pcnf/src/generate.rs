//! Random test networks with a known feasible state.

use pcnf_core::cost::CostFunction;
use pcnf_core::network::{EdgeSpec, Network, NodeId, NodeSpec};
use pcnf_core::physics::{Direction, FlowLaw, PhysicsKind};
use pcnf_core::Interval;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gas,
    Dissipative,
}

/// Slack potential of generated networks.
pub const SLACK_POTENTIAL: f64 = 25.0;

fn physics<R: Rng>(rng: &mut R, family: Family) -> PhysicsKind {
    match family {
        Family::Gas => PhysicsKind::Gas { gamma: rng.gen_range(0.5..2.0), offset: 0.0 },
        Family::Dissipative => PhysicsKind::Dissipative {
            law: FlowLaw::Power { coef: rng.gen_range(0.1..0.5), exponent: [1.0, 1.5, 2.0][rng.gen_range(0..3)] },
        },
    }
}

fn max_flow(p: &PhysicsKind) -> f64 {
    let d = [SLACK_POTENTIAL];
    p.flow(&d, &[0.0], Direction::Forward).unwrap()[0].abs()
}

/// Builds a network over `edges` whose injections are a band around those of a
/// random feasible potential profile. Node 0 is the slack.
pub fn network_on<R: Rng>(rng: &mut R, family: Family, n: usize, edges: &[(NodeId, NodeId)]) -> Network {
    let pi: Vec<f64> = (0..n).map(|k| if k == 0 { SLACK_POTENTIAL } else { rng.gen_range(5.0..SLACK_POTENTIAL - 1.0) }).collect();
    let mut q = vec![0.0; n];
    let mut es = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        let ph = physics(rng, family);
        let f = ph.flow(&[pi[a as usize]], &[pi[b as usize]], Direction::Forward).unwrap()[0];
        q[a as usize] += f;
        q[b as usize] -= f;
        let m = max_flow(&ph);
        es.push(EdgeSpec {
            from: a,
            to: b,
            physics: ph,
            flow_domain: vec![Interval::new(-m, m)],
            reverse_flow_domain: None,
            measured_flow: None,
        });
    }
    let nodes = (0..n)
        .map(|k| {
            let slack = k == 0;
            let w = rng.gen_range(0.5..2.0);
            NodeSpec {
                id: k as NodeId,
                injection: vec![if slack { Interval::new(-100.0, 100.0) } else { Interval::new(q[k] - w, q[k] + w) }],
                potential: vec![if slack { Interval::point(SLACK_POTENTIAL) } else { Interval::new(0.0, SLACK_POTENTIAL) }],
                cost: if slack {
                    CostFunction::zero()
                } else {
                    CostFunction::Quadratic { a: 0.0, b: rng.gen_range(-1.0..1.0), c: rng.gen_range(0.1..1.0) }
                },
                transform: None,
                measurement: None,
            }
        })
        .collect();
    Network { components: 1, slack: vec![0], nodes, edges: es, aggregators: vec![] }
}

/// Random tree on `n` nodes, plus one extra edge closing a cycle when `loopy`.
pub fn random_network<R: Rng>(rng: &mut R, family: Family, n: usize, loopy: bool) -> Network {
    assert!(n >= 2 && (!loopy || n >= 3));
    let mut edges: Vec<(NodeId, NodeId)> = (1..n).map(|k| (rng.gen_range(0..k) as NodeId, k as NodeId)).collect();
    if loopy {
        loop {
            let a = rng.gen_range(0..n) as NodeId;
            let b = rng.gen_range(0..n) as NodeId;
            let (a, b) = (a.min(b), a.max(b));
            if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == (a, b)) {
                edges.push((a, b));
                break;
            }
        }
    }
    network_on(rng, family, n, &edges)
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn chain<R: Rng>(rng: &mut R, family: Family, n: usize) -> Network {
    let edges: Vec<(NodeId, NodeId)> = (1..n).map(|k| (k as NodeId - 1, k as NodeId)).collect();
    network_on(rng, family, n, &edges)
}

/// Slack at squared pressure 25 feeding one consumer of 2 units through a unit
/// Weymouth pipe; the consumer sits at 21. The consumer cost is `(q + 1)^2`.
pub fn two_node_gas() -> Network {
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
                cost: CostFunction::Quadratic { a: 1.0, b: 2.0, c: 1.0 },
                transform: None,
                measurement: None,
            },
        ],
        edges: vec![EdgeSpec {
            from: 0,
            to: 1,
            physics: PhysicsKind::Gas { gamma: 1.0, offset: 0.0 },
            flow_domain: vec![Interval::new(-5.0, 5.0)],
            reverse_flow_domain: None,
            measured_flow: None,
        }],
        aggregators: vec![],
    }
}
