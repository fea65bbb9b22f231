//! JSON network files.
//!
//! ```json
//! {
//!   "components": 1,
//!   "slack": 0,
//!   "objective": "min-cost",
//!   "nodes": [
//!     {"id": 0, "injection": [[-10, 10]], "potential": [25]},
//!     {"id": 1, "injection": [-2], "potential": [[0, 25]],
//!      "cost": {"kind": "quadratic", "a": 0, "b": 0, "c": 1}}
//!   ],
//!   "edges": [
//!     {"from": 0, "to": 1, "physics": {"kind": "gas", "gamma": 1},
//!      "flow_domain": [[-5, 5]]}
//!   ]
//! }
//! ```
//!
//! An interval is `[lo, hi]` or a bare number for a singleton. Gas potentials are
//! squared pressures, not pressures. AC networks use two components, the real and
//! imaginary parts of voltages, powers and currents.

use pcnf_core::cost::CostFunction;
use pcnf_core::graph::ObjectiveMode;
use pcnf_core::network::{AggregatorSpec, EdgeSpec, Network, NodeId, NodeMeasurement, NodeSpec, TransformKind, TransformSpec};
use pcnf_core::physics::{FlowLaw, PhysicsKind};
use pcnf_core::Interval;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntervalDto {
    Point(f64),
    Range([f64; 2]),
}

impl IntervalDto {
    fn get(self) -> Interval {
        // reversed ends are kept so that validation can report them
        match self {
            IntervalDto::Point(x) => Interval { lo: x, hi: x },
            IntervalDto::Range([lo, hi]) => Interval { lo, hi },
        }
    }

    fn of(i: Interval) -> Self {
        if i.lo == i.hi {
            IntervalDto::Point(i.lo)
        } else {
            IntervalDto::Range([i.lo, i.hi])
        }
    }
}

fn ivs(v: &[IntervalDto]) -> Vec<Interval> {
    v.iter().map(|i| i.get()).collect()
}

fn dtos(v: &[Interval]) -> Vec<IntervalDto> {
    v.iter().map(|&i| IntervalDto::of(i)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlackDto {
    One(NodeId),
    Many(Vec<NodeId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostDto {
    Affine { a: f64, b: f64 },
    Quadratic { a: f64, b: f64, c: f64 },
    PiecewiseLinear { x: Vec<f64>, y: Vec<f64> },
    AbsDeviation { weight: f64, reference: f64 },
    Polynomial { coeffs: Vec<f64> },
}

impl From<&CostDto> for CostFunction {
    fn from(c: &CostDto) -> Self {
        match c.clone() {
            CostDto::Affine { a, b } => CostFunction::Affine { a, b },
            CostDto::Quadratic { a, b, c } => CostFunction::Quadratic { a, b, c },
            CostDto::PiecewiseLinear { x, y } => CostFunction::PiecewiseLinear { x, y },
            CostDto::AbsDeviation { weight, reference } => CostFunction::AbsDeviation { weight, reference },
            CostDto::Polynomial { coeffs } => CostFunction::Polynomial { coeffs },
        }
    }
}

impl From<&CostFunction> for CostDto {
    fn from(c: &CostFunction) -> Self {
        match c.clone() {
            CostFunction::Affine { a, b } => CostDto::Affine { a, b },
            CostFunction::Quadratic { a, b, c } => CostDto::Quadratic { a, b, c },
            CostFunction::PiecewiseLinear { x, y } => CostDto::PiecewiseLinear { x, y },
            CostFunction::AbsDeviation { weight, reference } => CostDto::AbsDeviation { weight, reference },
            CostFunction::Polynomial { coeffs } => CostDto::Polynomial { coeffs },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawDto {
    Power { coef: f64, exponent: f64 },
    Table { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhysicsDto {
    Gas {
        gamma: f64,
        #[serde(default)]
        offset: f64,
    },
    AcPower { r: f64, x: f64 },
    AcCurrent { r: f64, x: f64 },
    Dissipative { law: LawDto },
    CustomTable {
        delta: Vec<f64>,
        flow: Vec<f64>,
        #[serde(default)]
        pad: f64,
    },
}

impl From<&PhysicsDto> for PhysicsKind {
    fn from(p: &PhysicsDto) -> Self {
        match p.clone() {
            PhysicsDto::Gas { gamma, offset } => PhysicsKind::Gas { gamma, offset },
            PhysicsDto::AcPower { r, x } => PhysicsKind::AcPowerVoltage { r, x },
            PhysicsDto::AcCurrent { r, x } => PhysicsKind::AcCurrentVoltage { r, x },
            PhysicsDto::Dissipative { law } => PhysicsKind::Dissipative {
                law: match law {
                    LawDto::Power { coef, exponent } => FlowLaw::Power { coef, exponent },
                    LawDto::Table { x, y } => FlowLaw::Table { x, y },
                },
            },
            PhysicsDto::CustomTable { delta, flow, pad } => PhysicsKind::CustomTable { delta, flow, pad },
        }
    }
}

impl From<&PhysicsKind> for PhysicsDto {
    fn from(p: &PhysicsKind) -> Self {
        match p.clone() {
            PhysicsKind::Gas { gamma, offset } => PhysicsDto::Gas { gamma, offset },
            PhysicsKind::AcPowerVoltage { r, x } => PhysicsDto::AcPower { r, x },
            PhysicsKind::AcCurrentVoltage { r, x } => PhysicsDto::AcCurrent { r, x },
            PhysicsKind::Dissipative { law } => PhysicsDto::Dissipative {
                law: match law {
                    FlowLaw::Power { coef, exponent } => LawDto::Power { coef, exponent },
                    FlowLaw::Table { x, y } => LawDto::Table { x, y },
                },
            },
            PhysicsKind::CustomTable { delta, flow, pad } => PhysicsDto::CustomTable { delta, flow, pad },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TransformKindDto {
    Multiplicative { ratio: Vec<f64> },
    VariableRatio {
        domain: IntervalDto,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<CostDto>,
    },
    Additive { offset: Vec<f64> },
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDto {
    #[serde(flatten)]
    pub kind: TransformKindDto,
    pub in_port: NodeId,
    pub out_port: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_potential: Option<Vec<IntervalDto>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDto {
    pub id: NodeId,
    pub injection: Vec<IntervalDto>,
    pub potential: Vec<IntervalDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementDto>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDto {
    pub from: NodeId,
    pub to: NodeId,
    pub physics: PhysicsDto,
    pub flow_domain: Vec<IntervalDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_flow_domain: Option<Vec<IntervalDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_flow: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregatorDto {
    pub members: Vec<NodeId>,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub component: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveDto {
    MinCost,
    DistributionLoss,
    OptimalGas,
    StateEstimation,
}

impl From<ObjectiveDto> for ObjectiveMode {
    fn from(o: ObjectiveDto) -> Self {
        match o {
            ObjectiveDto::MinCost => ObjectiveMode::MinCost,
            ObjectiveDto::DistributionLoss => ObjectiveMode::DistributionLoss,
            ObjectiveDto::OptimalGas => ObjectiveMode::OptimalGas,
            ObjectiveDto::StateEstimation => ObjectiveMode::StateEstimation,
        }
    }
}

impl From<ObjectiveMode> for ObjectiveDto {
    fn from(o: ObjectiveMode) -> Self {
        match o {
            ObjectiveMode::MinCost => ObjectiveDto::MinCost,
            ObjectiveMode::DistributionLoss => ObjectiveDto::DistributionLoss,
            ObjectiveMode::OptimalGas => ObjectiveDto::OptimalGas,
            ObjectiveMode::StateEstimation => ObjectiveDto::StateEstimation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default = "one")]
    pub components: usize,
    pub slack: SlackDto,
    #[serde(default = "min_cost")]
    pub objective: ObjectiveDto,
    pub nodes: Vec<NodeDto>,
    pub edges: Vec<EdgeDto>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregators: Vec<AggregatorDto>,
}

fn one() -> usize {
    1
}

fn min_cost() -> ObjectiveDto {
    ObjectiveDto::MinCost
}

impl NetworkFile {
    pub fn network(&self) -> Network {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id,
                injection: ivs(&n.injection),
                potential: ivs(&n.potential),
                cost: n.cost.as_ref().map_or_else(CostFunction::zero, CostFunction::from),
                transform: n.transform.as_ref().map(|t| TransformSpec {
                    kind: match &t.kind {
                        TransformKindDto::Multiplicative { ratio } => TransformKind::Multiplicative(ratio.clone()),
                        TransformKindDto::VariableRatio { domain, cost } => TransformKind::VariableRatio {
                            domain: domain.get(),
                            cost: cost.as_ref().map_or_else(CostFunction::zero, CostFunction::from),
                        },
                        TransformKindDto::Additive { offset } => TransformKind::Additive(offset.clone()),
                        TransformKindDto::Tabulated { x, y } => TransformKind::Tabulated { x: x.clone(), y: y.clone() },
                    },
                    in_port: t.in_port,
                    out_port: t.out_port,
                    out_potential: t.out_potential.as_deref().map(ivs),
                }),
                measurement: n.measurement.as_ref().map(|m| NodeMeasurement { potential: m.potential.clone(), injection: m.injection.clone() }),
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeSpec {
                from: e.from,
                to: e.to,
                physics: PhysicsKind::from(&e.physics),
                flow_domain: ivs(&e.flow_domain),
                reverse_flow_domain: e.reverse_flow_domain.as_deref().map(ivs),
                measured_flow: e.measured_flow.clone(),
            })
            .collect();
        Network {
            components: self.components,
            slack: match &self.slack {
                SlackDto::One(s) => vec![*s],
                SlackDto::Many(v) => v.clone(),
            },
            nodes,
            edges,
            aggregators: self
                .aggregators
                .iter()
                .map(|a| AggregatorSpec { members: a.members.clone(), lower: a.lower, upper: a.upper, component: a.component })
                .collect(),
        }
    }

    pub fn from_network(net: &Network, objective: ObjectiveMode) -> Self {
        NetworkFile {
            components: net.components,
            slack: match net.slack.as_slice() {
                [s] => SlackDto::One(*s),
                v => SlackDto::Many(v.to_vec()),
            },
            objective: objective.into(),
            nodes: net
                .nodes
                .iter()
                .map(|n| NodeDto {
                    id: n.id,
                    injection: dtos(&n.injection),
                    potential: dtos(&n.potential),
                    cost: if n.cost.is_zero() { None } else { Some(CostDto::from(&n.cost)) },
                    transform: n.transform.as_ref().map(|t| TransformDto {
                        kind: match &t.kind {
                            TransformKind::Multiplicative(r) => TransformKindDto::Multiplicative { ratio: r.clone() },
                            TransformKind::VariableRatio { domain, cost } => TransformKindDto::VariableRatio {
                                domain: IntervalDto::of(*domain),
                                cost: if cost.is_zero() { None } else { Some(CostDto::from(cost)) },
                            },
                            TransformKind::Additive(b) => TransformKindDto::Additive { offset: b.clone() },
                            TransformKind::Tabulated { x, y } => TransformKindDto::Tabulated { x: x.clone(), y: y.clone() },
                        },
                        in_port: t.in_port,
                        out_port: t.out_port,
                        out_potential: t.out_potential.as_deref().map(dtos),
                    }),
                    measurement: n.measurement.as_ref().map(|m| MeasurementDto { potential: m.potential.clone(), injection: m.injection.clone() }),
                })
                .collect(),
            edges: net
                .edges
                .iter()
                .map(|e| EdgeDto {
                    from: e.from,
                    to: e.to,
                    physics: PhysicsDto::from(&e.physics),
                    flow_domain: dtos(&e.flow_domain),
                    reverse_flow_domain: e.reverse_flow_domain.as_deref().map(dtos),
                    measured_flow: e.measured_flow.clone(),
                })
                .collect(),
            aggregators: net
                .aggregators
                .iter()
                .map(|a| AggregatorDto { members: a.members.clone(), lower: a.lower, upper: a.upper, component: a.component })
                .collect(),
        }
    }
}

/// Malformed input, with the position reported by the JSON parser.
#[derive(Debug, thiserror::Error)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub fn parse_network(text: &str) -> Result<NetworkFile, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError { line: e.line(), column: e.column(), message: e.to_string() })
}

pub fn to_json(file: &NetworkFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("network serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::two_node_gas;

    #[test]
    fn round_trip() {
        let net = two_node_gas();
        let f = NetworkFile::from_network(&net, ObjectiveMode::MinCost);
        let back = parse_network(&to_json(&f)).unwrap();
        assert_eq!(back.network(), net);
        assert_eq!(back, f);
    }

    #[test]
    fn minimal_file() {
        let text = r#"{"slack": 0, "nodes": [{"id": 0, "injection": [[-1, 1]], "potential": [4]},
            {"id": 1, "injection": [0], "potential": [[0, 4]]}],
            "edges": [{"from": 0, "to": 1, "physics": {"kind": "gas", "gamma": 1}, "flow_domain": [[-3, 3]]}]}"#;
        let net = parse_network(text).unwrap().network();
        assert!(net.validate().is_ok());
        assert_eq!(net.nodes[0].potential, vec![Interval::point(4.0)]);
        assert_eq!(net.edges[0].physics, PhysicsKind::Gas { gamma: 1.0, offset: 0.0 });
    }

    #[test]
    fn parse_error_has_position() {
        let e = parse_network("{\n  \"slack\": 0,\n  \"nodes\": [}\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.to_string().starts_with("parse error at line 3"));
    }

    #[test]
    fn unknown_physics_is_rejected() {
        let text = r#"{"slack": 0, "nodes": [], "edges": [{"from": 0, "to": 1, "physics": {"kind": "steam"}, "flow_domain": [1]}]}"#;
        assert!(parse_network(text).is_err());
    }
}
