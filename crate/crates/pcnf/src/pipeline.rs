//! The solve pipeline: tighten, build the factor graph, discretize, solve, refine.

use std::collections::BTreeMap;
use std::time::Instant;

use pcnf_core::discretize::{Label, Partition};
use pcnf_core::graph::{build_gm, FactorGraph, ObjectiveMode};
use pcnf_core::lp::{build_hierarchy_lp, build_int_part_lp, check_integrality, generate_supernodes, BeliefLp, Level, LpStatus, DEFAULT_SUPERNODE_CAP, INT_TOL};
use pcnf_core::network::Network;
use pcnf_core::oracle::{discretized_optimum, grid_continuous, ContinuousOptions, OracleResult};
use pcnf_core::region::{representative_point, RegionModel, DEFAULT_TUPLE_CAP};
use pcnf_core::tighten::{tighten_all, BoundsState, Schedule, TightenOptions};
use pcnf_core::tree::solve_tree;
use pcnf_core::{Error, Result};
use serde::Serialize;

use crate::engine::{self, LpEngine};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    /// Tree DP when the factor graph is a tree, the belief LP otherwise.
    Auto,
    Lp,
    Tree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinePolicy {
    /// Bisect the widest cell used by the incumbent.
    Widest,
    /// Bisect the widest cell among labels with fractional belief, else as `Widest`.
    Fractional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hierarchy {
    Off,
    Minimal,
    Size(usize),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Cells per coordinate.
    pub t: usize,
    pub refine_rounds: usize,
    /// Tightening sweeps, 0 for none.
    pub tighten_sweeps: usize,
    /// Sub-cells per coordinate in local tightening.
    pub tighten_resolution: usize,
    pub hierarchy: Hierarchy,
    pub solver: SolverChoice,
    pub engine: LpEngine,
    pub refine: RefinePolicy,
    pub seed: u64,
    /// Evaluate the continuous oracle after every round.
    pub oracle: bool,
    pub oracle_cap: usize,
    /// Grid points sampled by the per-round oracle.
    pub oracle_samples: usize,
    pub tuple_cap: usize,
    pub supernode_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t: 8,
            refine_rounds: 0,
            tighten_sweeps: 0,
            tighten_resolution: 16,
            hierarchy: Hierarchy::Off,
            solver: SolverChoice::Auto,
            engine: LpEngine::Auto,
            refine: RefinePolicy::Widest,
            seed: 0,
            oracle: false,
            oracle_cap: pcnf_core::oracle::DEFAULT_CAP,
            oracle_samples: 2048,
            tuple_cap: DEFAULT_TUPLE_CAP,
            supernode_cap: DEFAULT_SUPERNODE_CAP,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::InvalidArgument("t must be at least 1".into()));
        }
        if self.solver == SolverChoice::Tree && self.hierarchy != Hierarchy::Off {
            return Err(Error::InvalidArgument("--hierarchy needs the LP solver".into()));
        }
        if let Hierarchy::Size(0) = self.hierarchy {
            return Err(Error::InvalidArgument("hierarchy size must be at least 1".into()));
        }
        if self.tighten_sweeps > 0 && self.tighten_resolution < 2 {
            return Err(Error::InvalidArgument("tightening resolution must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceSummary {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub objective: &'static str,
    pub network_is_tree: bool,
    pub graph_is_tree: bool,
    pub variables: usize,
    pub coordinates: usize,
    pub factors: usize,
    pub constraints: usize,
}

impl InstanceSummary {
    pub fn new(net: &Network, objective: ObjectiveMode, gm: &FactorGraph) -> Self {
        InstanceSummary {
            nodes: net.nodes.len(),
            edges: net.edges.len(),
            components: net.components,
            objective: objective.name(),
            network_is_tree: net.is_tree(),
            graph_is_tree: gm.is_tree(),
            variables: gm.vars.len(),
            coordinates: gm.coords.len(),
            factors: gm.factors.len(),
            constraints: gm.constraints.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordInterval {
    pub coordinate: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TighteningReport {
    pub sweeps: usize,
    /// Largest endpoint move per sweep.
    pub changes: Vec<f64>,
    pub bounds: Vec<CoordInterval>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub solver: &'static str,
    pub lower_bound: f64,
    pub integral: bool,
    pub tuples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_columns: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_rows: Option<usize>,
    /// Best feasible objective found by the continuous oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_residual: Option<f64>,
    /// `(upper - lower) / max(|upper|, 1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Cell bisected after this round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<CoordInterval>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundChecks {
    /// Lower bounds never decrease over rounds.
    pub nondecreasing: bool,
    /// Every lower bound is at most the oracle upper estimate of its round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub below_oracle: Option<bool>,
}

impl BoundChecks {
    pub fn ok(&self) -> bool {
        self.nondecreasing && self.below_oracle != Some(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub coordinate: String,
    pub lo: f64,
    pub hi: f64,
    pub point: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarAssignment {
    pub variable: String,
    pub label: Label,
    pub cells: Vec<CellReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordCuts {
    pub coordinate: String,
    pub cuts: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub instance: InstanceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tightening: Option<TighteningReport>,
    pub rounds: Vec<RoundReport>,
    pub lower_bound: f64,
    pub integral: bool,
    pub bound_checks: BoundChecks,
    pub assignment: Vec<VarAssignment>,
    pub partition: Vec<CoordCuts>,
    /// Seconds per stage; not reproducible.
    pub timing: BTreeMap<String, f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report with timings cleared, for comparisons.
    pub fn without_timing(&self) -> Report {
        Report { timing: BTreeMap::new(), ..self.clone() }
    }

    pub fn summary(&self) -> String {
        let last = self.rounds.last().expect("at least one round");
        let mut s = format!("lower bound {} ({}, {} round(s))", self.lower_bound, last.solver, self.rounds.len());
        if let Some(g) = last.gap {
            s.push_str(&format!(", gap {:.3}%", 100.0 * g));
        }
        s.push_str(if self.integral { ", integral" } else { ", fractional" });
        s
    }
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.0.entry(stage.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }
}

/// Factor graph after validation and optional tightening.
pub struct Prepared {
    pub gm: FactorGraph,
    pub tightening: Option<TighteningReport>,
}

fn coord_intervals(gm: &FactorGraph, b: &[pcnf_core::Interval]) -> Vec<CoordInterval> {
    gm.coords.iter().zip(b).map(|(c, i)| CoordInterval { coordinate: c.name.clone(), lo: i.lo, hi: i.hi }).collect()
}

pub fn prepare(net: &Network, objective: ObjectiveMode, cfg: &RunConfig) -> Result<Prepared> {
    cfg.check()?;
    let rep = net.validate();
    if !rep.is_ok() {
        return Err(Error::InvalidNetwork(rep.violations));
    }
    let gm = build_gm(net, objective)?;
    if cfg.tighten_sweeps == 0 {
        return Ok(Prepared { gm, tightening: None });
    }
    let opts = TightenOptions { m: cfg.tighten_resolution, max_sweeps: cfg.tighten_sweeps, schedule: Schedule::Jacobi, ..TightenOptions::default() };
    let st = tighten_all(&gm, BoundsState::new(&gm), &opts)?;
    let gm = gm.with_domains(&st.bounds)?;
    let bounds = coord_intervals(&gm, &st.bounds);
    Ok(Prepared { gm, tightening: Some(TighteningReport { sweeps: st.sweeps, changes: st.changes, bounds }) })
}

fn level(h: Hierarchy) -> Option<Level> {
    match h {
        Hierarchy::Off => None,
        Hierarchy::Minimal => Some(Level::Minimal),
        Hierarchy::Size(k) => Some(Level::Size(k)),
    }
}

/// Plain or hierarchy belief LP of a region model.
pub fn belief_lp(model: &RegionModel, cfg: &RunConfig) -> Result<BeliefLp> {
    match level(cfg.hierarchy) {
        None => build_int_part_lp(model),
        Some(l) => {
            let sn = generate_supernodes(model, l, cfg.supernode_cap)?;
            build_hierarchy_lp(model, &sn, cfg.tuple_cap)
        }
    }
}

/// Outcome of one solve of a region model.
pub struct Solved {
    pub solver: &'static str,
    pub value: f64,
    pub assignment: Vec<Label>,
    pub integral: bool,
    /// `(variable, label)` pairs with fractional belief.
    pub fractional: Vec<(usize, Label)>,
    pub lp_size: Option<(usize, usize)>,
}

pub fn use_tree(gm: &FactorGraph, cfg: &RunConfig) -> Result<bool> {
    match cfg.solver {
        SolverChoice::Tree if !gm.is_tree() => Err(Error::NotATree),
        SolverChoice::Tree => Ok(true),
        SolverChoice::Lp => Ok(false),
        SolverChoice::Auto => Ok(cfg.hierarchy == Hierarchy::Off && gm.is_tree()),
    }
}

pub fn solve_model(model: &RegionModel, tree: bool, cfg: &RunConfig) -> Result<Solved> {
    if tree {
        let s = solve_tree(model, 0)?;
        return Ok(Solved { solver: "tree-dp", value: s.value, assignment: s.assignment, integral: true, fractional: vec![], lp_size: None });
    }
    let blp = belief_lp(model, cfg)?;
    let engine = cfg.engine.resolve(&blp.lp);
    let sol = engine::solve(&blp.lp, engine)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::DiscretizationInfeasible("the belief LP has no feasible point".into())),
        LpStatus::Unbounded => return Err(Error::Internal("belief LP reported unbounded".into())),
    }
    let (integral, _) = check_integrality(&sol, INT_TOL);
    let fractional = blp.singles(&sol.x).into_iter().filter(|&(_, _, b)| b > INT_TOL && b < 1.0 - INT_TOL).map(|(v, l, _)| (v, l)).collect();
    Ok(Solved {
        solver: if engine == LpEngine::Sparse { "lp-sparse" } else { "lp-dense" },
        value: sol.objective,
        assignment: blp.incumbent(&sol.x, model.vars()),
        integral,
        fractional,
        lp_size: Some((blp.lp.cols.len(), blp.lp.rows.len())),
    })
}

/// Widest positive-width cell among the given `(variable, label)` pairs.
fn widest(gm: &FactorGraph, part: &Partition, picks: &[(usize, Label)]) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for &(v, l) in picks {
        for (&c, k) in gm.vars[v].coords.iter().zip(part.decode(gm, v, l)) {
            let w = part.cell(c, k).width();
            let better = match best {
                None => w > 0.0,
                Some((bw, bc, _)) => w > bw || (w == bw && c < bc),
            };
            if better && part.cell(c, k).mid() > part.cell(c, k).lo {
                best = Some((w, c, k));
            }
        }
    }
    best.map(|(_, c, k)| (c, k))
}

pub fn pick_refinement(gm: &FactorGraph, part: &Partition, s: &Solved, policy: RefinePolicy) -> Option<(usize, usize)> {
    let incumbent: Vec<(usize, Label)> = s.assignment.iter().enumerate().map(|(v, &l)| (v, l)).collect();
    match policy {
        RefinePolicy::Widest => widest(gm, part, &incumbent),
        RefinePolicy::Fractional => widest(gm, part, &s.fractional).or_else(|| widest(gm, part, &incumbent)),
    }
}

fn oracle_round(gm: &FactorGraph, part: &Partition, cfg: &RunConfig) -> Result<OracleResult> {
    let opts = ContinuousOptions { cap: cfg.oracle_samples.min(cfg.oracle_cap), seed: cfg.seed, sample: true, ..ContinuousOptions::default() };
    grid_continuous(gm, part, &opts)
}

pub fn solve(net: &Network, objective: ObjectiveMode, cfg: &RunConfig) -> Result<Report> {
    let mut timer = Timer(BTreeMap::new());
    let prep = timer.time("prepare", || prepare(net, objective, cfg))?;
    let gm = &prep.gm;
    let tree = use_tree(gm, cfg)?;
    let mut part = Partition::uniform(gm, cfg.t)?;
    let mut rounds: Vec<RoundReport> = Vec::new();
    let mut prev: Option<(RegionModel, Partition)> = None;
    let mut last: Option<Solved> = None;
    for round in 0..=cfg.refine_rounds {
        let mut model = timer.time("tables", || RegionModel::build(gm, &part, cfg.tuple_cap))?;
        if let Some((pm, pp)) = &prev {
            timer.time("tables", || model.nest_under(gm, &part, pm, pp))?;
        }
        let s = timer.time("solve", || solve_model(&model, tree, cfg))?;
        let mut rr = RoundReport {
            round,
            solver: s.solver,
            lower_bound: s.value,
            integral: s.integral,
            tuples: model.size(),
            lp_columns: s.lp_size.map(|x| x.0),
            lp_rows: s.lp_size.map(|x| x.1),
            oracle_upper: None,
            oracle_residual: None,
            gap: None,
            refined: None,
        };
        if cfg.oracle {
            let o = timer.time("oracle", || oracle_round(gm, &part, cfg))?;
            rr.oracle_residual = Some(o.residual);
            if o.feasible {
                rr.oracle_upper = Some(o.value);
                rr.gap = Some((o.value - s.value) / o.value.abs().max(1.0));
            }
        }
        if round < cfg.refine_rounds {
            if let Some((c, k)) = pick_refinement(gm, &part, &s, cfg.refine) {
                let cell = part.cell(c, k);
                rr.refined = Some(CoordInterval { coordinate: gm.coords[c].name.clone(), lo: cell.lo, hi: cell.hi });
                let next = part.refined(c, k)?;
                prev = Some((model, std::mem::replace(&mut part, next)));
            } else {
                rounds.push(rr);
                last = Some(s);
                break;
            }
        }
        rounds.push(rr);
        last = Some(s);
    }
    let s = last.expect("one round");
    let nondecreasing = rounds.windows(2).all(|w| w[1].lower_bound >= w[0].lower_bound);
    let below_oracle = cfg.oracle.then(|| {
        rounds.iter().all(|r| r.oracle_upper.map_or(true, |u| r.lower_bound <= u + 1e-7 * (1.0 + u.abs())))
    });
    let point = representative_point(gm, &part, &s.assignment);
    let assignment = gm
        .vars
        .iter()
        .enumerate()
        .map(|(v, var)| VarAssignment {
            variable: var.name.clone(),
            label: s.assignment[v],
            cells: var
                .coords
                .iter()
                .zip(part.decode(gm, v, s.assignment[v]))
                .map(|(&c, k)| {
                    let cell = part.cell(c, k);
                    CellReport { coordinate: gm.coords[c].name.clone(), lo: cell.lo, hi: cell.hi, point: point[c] }
                })
                .collect(),
        })
        .collect();
    let partition = gm.coords.iter().zip(&part.cuts).map(|(c, cuts)| CoordCuts { coordinate: c.name.clone(), cuts: cuts.clone() }).collect();
    let instance = InstanceSummary::new(net, objective, gm);
    Ok(Report {
        instance,
        tightening: prep.tightening,
        lower_bound: s.value,
        integral: s.integral,
        rounds,
        bound_checks: BoundChecks { nondecreasing, below_oracle },
        assignment,
        partition,
        timing: timer.0,
    })
}

/// The belief LP of the first round, for export.
pub fn export_lp(net: &Network, objective: ObjectiveMode, cfg: &RunConfig) -> Result<pcnf_core::lp::LinearProgram> {
    let prep = prepare(net, objective, cfg)?;
    let part = Partition::uniform(&prep.gm, cfg.t)?;
    let model = RegionModel::build(&prep.gm, &part, cfg.tuple_cap)?;
    Ok(belief_lp(&model, cfg)?.lp)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSide {
    pub value: f64,
    pub residual: f64,
    pub feasible: bool,
    pub enumerated: usize,
    pub point: Vec<CellPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellPoint {
    pub coordinate: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub instance: InstanceSummary,
    pub t: usize,
    /// Exact optimum of the discretized problem.
    pub discretized: OracleSide,
    /// Best point of the cell-midpoint grid after repair; an upper estimate when feasible.
    pub continuous: OracleSide,
}

impl OracleReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn oracle(net: &Network, objective: ObjectiveMode, cfg: &RunConfig) -> Result<OracleReport> {
    let prep = prepare(net, objective, cfg)?;
    let gm = &prep.gm;
    let part = Partition::uniform(gm, cfg.t)?;
    let model = RegionModel::build(gm, &part, cfg.tuple_cap)?;
    let (value, labels, nodes) = discretized_optimum(&model, cfg.oracle_cap)?;
    let dp = representative_point(gm, &part, &labels);
    let side = |r: &OracleResult| OracleSide {
        value: r.value,
        residual: r.residual,
        feasible: r.feasible,
        enumerated: r.enumerated,
        point: gm.coords.iter().zip(&r.point).map(|(c, &v)| CellPoint { coordinate: c.name.clone(), value: v }).collect(),
    };
    let opts = ContinuousOptions { cap: cfg.oracle_cap, seed: cfg.seed, sample: false, ..ContinuousOptions::default() };
    let residual = gm.max_residual(&dp);
    let disc = OracleResult { value, labels: Some(labels), residual, point: dp, feasible: residual <= opts.tol, enumerated: nodes };
    let cont = grid_continuous(gm, &part, &opts)?;
    let instance = InstanceSummary::new(net, objective, gm);
    Ok(OracleReport { instance, t: cfg.t, discretized: side(&disc), continuous: side(&cont) })
}
