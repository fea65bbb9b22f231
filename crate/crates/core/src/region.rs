//! The finite valued CSP shared by the LP, the tree DP and the oracle: one table
//! per factor or constraint node over a fixed partition.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretize::{feasible_tuples, lower_bound_table, Label, Partition, Table};
use crate::graph::{FactorGraph, NodeRef, VarId};
use crate::interval::Interval;
use crate::relation::Verdict;
use crate::{Error, Result};

/// Default cap on the number of tuples per table.
pub const DEFAULT_TUPLE_CAP: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct RegionModel {
    /// Label count per variable.
    pub labels: Vec<usize>,
    /// One table per function node, in `FactorGraph::function_nodes` order.
    pub regions: Vec<Table>,
    /// Labels of each variable that survive pruning, sorted.
    pub support: Vec<Vec<Label>>,
}

impl RegionModel {
    /// Builds all tables and prunes unsupported labels. Fails with
    /// `DiscretizationInfeasible` when a table or a support set becomes empty.
    pub fn build(gm: &FactorGraph, part: &Partition, cap: usize) -> Result<Self> {
        part.check(gm)?;
        let labels: Vec<usize> = (0..gm.vars.len()).map(|v| part.labels(gm, v)).collect();
        if labels.iter().any(|&l| l > Label::MAX as usize) {
            return Err(Error::ResourceCap("too many labels for one variable".into()));
        }
        let mut regions = Vec::new();
        for n in gm.function_nodes() {
            let t = match n {
                NodeRef::Factor(f) => lower_bound_table(gm, f, part, cap)?,
                NodeRef::Constraint(c) => feasible_tuples(gm, c, part, cap)?,
            };
            regions.push(t);
        }
        let mut m = RegionModel { labels, regions, support: Vec::new() };
        m.prune()?;
        Ok(m)
    }

    /// Builds a model from hand-made tables (tests and generic problems).
    pub fn from_tables(labels: Vec<usize>, regions: Vec<Table>) -> Result<Self> {
        for r in &regions {
            if r.scope.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument("region scope must be sorted and unique".into()));
            }
            for i in 0..r.len() {
                let t = r.tuple(i);
                if t.iter().zip(&r.scope).any(|(&l, &v)| l as usize >= labels[v]) {
                    return Err(Error::InvalidArgument("tuple label out of range".into()));
                }
                if i > 0 && r.tuple(i - 1) >= t {
                    return Err(Error::InvalidArgument("region tuples must be sorted and unique".into()));
                }
            }
        }
        let mut m = RegionModel { labels, regions, support: Vec::new() };
        m.prune()?;
        Ok(m)
    }

    /// Removes tuples using a label that some other region sharing the variable
    /// does not support, until a fixed point. Feasible joint assignments are kept.
    fn prune(&mut self) -> Result<()> {
        let n = self.labels.len();
        let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, t) in self.regions.iter().enumerate() {
            for &v in &t.scope {
                by_var[v].push(r);
            }
        }
        for (r, t) in self.regions.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::DiscretizationInfeasible(format!("region {r} has no feasible tuple")));
            }
        }
        let mut alive: Vec<Vec<bool>> = self.labels.iter().map(|&l| vec![true; l]).collect();
        loop {
            let mut changed = false;
            for v in 0..n {
                for &r in &by_var[v] {
                    let t = &self.regions[r];
                    let pos = t.scope.iter().position(|&x| x == v).unwrap();
                    let mut seen = vec![false; self.labels[v]];
                    for i in 0..t.len() {
                        seen[t.tuple(i)[pos] as usize] = true;
                    }
                    for (a, s) in alive[v].iter_mut().zip(seen) {
                        if *a && !s {
                            *a = false;
                            changed = true;
                        }
                    }
                }
                if !alive[v].iter().any(|&a| a) {
                    return Err(Error::DiscretizationInfeasible(format!("variable {v} has no supported label")));
                }
            }
            for t in self.regions.iter_mut() {
                let w = t.scope.len();
                let keep: Vec<bool> = (0..t.len()).map(|i| t.tuple(i).iter().zip(&t.scope).all(|(&l, &v)| alive[v][l as usize])).collect();
                if keep.iter().all(|&k| k) {
                    continue;
                }
                let mut j = 0;
                for i in 0..keep.len() {
                    if keep[i] {
                        t.tuples.copy_within(i * w..(i + 1) * w, j * w);
                        t.cost[j] = t.cost[i];
                        t.verdict[j] = t.verdict[i];
                        j += 1;
                    }
                }
                t.tuples.truncate(j * w);
                t.cost.truncate(j);
                t.verdict.truncate(j);
                if j == 0 {
                    return Err(Error::DiscretizationInfeasible("a region lost all tuples".into()));
                }
            }
            if !changed {
                break;
            }
        }
        self.support = alive.iter().map(|a| a.iter().enumerate().filter(|(_, &x)| x).map(|(l, _)| l as Label).collect()).collect();
        Ok(())
    }

    /// Restricts a model built on a refinement of `parent_part` by its parent: a
    /// tuple whose parent tuple is absent is dropped, and each cost is raised to the
    /// parent cost. Both are valid because every child box lies in its parent box,
    /// and they make the bound of nested refinements monotone in floating point.
    pub fn nest_under(&mut self, gm: &FactorGraph, part: &Partition, parent: &RegionModel, parent_part: &Partition) -> Result<()> {
        if parent.regions.len() != self.regions.len() || parent.labels.len() != self.labels.len() {
            return Err(Error::InvalidArgument("parent model has a different structure".into()));
        }
        let mut maps: Vec<Vec<Label>> = Vec::with_capacity(self.labels.len());
        for v in 0..self.labels.len() {
            let coords = &gm.vars[v].coords;
            // child cell -> parent cell per coordinate
            let mut cell_map: Vec<Vec<usize>> = Vec::with_capacity(coords.len());
            for &c in coords {
                let mut m = Vec::with_capacity(part.cells(c));
                for k in 0..part.cells(c) {
                    let cell = part.cell(c, k);
                    let r = parent_part.overlapping(c, &Interval::point(cell.mid()));
                    let pk = r.clone().find(|&j| parent_part.cell(c, j).contains_interval(&cell));
                    m.push(pk.ok_or_else(|| Error::InvalidArgument(format!("partition of coordinate {c} is not nested")))?);
                }
                cell_map.push(m);
            }
            let map = (0..self.labels[v] as Label)
                .map(|l| {
                    let cells: Vec<usize> = part.decode(gm, v, l).iter().zip(&cell_map).map(|(&k, m)| m[k]).collect();
                    parent_part.encode(gm, v, &cells)
                })
                .collect();
            maps.push(map);
        }
        for (t, pt) in self.regions.iter_mut().zip(&parent.regions) {
            if t.scope != pt.scope {
                return Err(Error::InvalidArgument("parent model has a different structure".into()));
            }
            let w = t.scope.len();
            let mut j = 0;
            let mut up = vec![0 as Label; w];
            for i in 0..t.len() {
                for (k, &v) in t.scope.iter().enumerate() {
                    up[k] = maps[v][t.tuples[i * w + k] as usize];
                }
                let Some(pi) = pt.find(&up) else { continue };
                t.tuples.copy_within(i * w..(i + 1) * w, j * w);
                t.cost[j] = t.cost[i].max(pt.cost[pi]);
                t.verdict[j] = t.verdict[i];
                j += 1;
            }
            t.tuples.truncate(j * w);
            t.cost.truncate(j);
            t.verdict.truncate(j);
        }
        self.prune()
    }

    pub fn vars(&self) -> usize {
        self.labels.len()
    }

    /// Regions adjacent to each variable.
    pub fn by_var(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.labels.len()];
        for (r, t) in self.regions.iter().enumerate() {
            for &v in &t.scope {
                out[v].push(r);
            }
        }
        out
    }

    /// Objective of a full labelling, `None` if some region rejects it.
    pub fn evaluate(&self, a: &[Label]) -> Option<f64> {
        let mut total = 0.0;
        let mut buf = Vec::new();
        for t in &self.regions {
            buf.clear();
            buf.extend(t.scope.iter().map(|&v| a[v]));
            total += t.cost[t.find(&buf)?];
        }
        Some(total)
    }

    /// Worst verdict of the regions at a labelling.
    pub fn verdict(&self, a: &[Label]) -> Option<Verdict> {
        let mut v = Verdict::Certain;
        let mut buf = Vec::new();
        for t in &self.regions {
            buf.clear();
            buf.extend(t.scope.iter().map(|&x| a[x]));
            v = v.min(t.verdict[t.find(&buf)?]);
        }
        Some(v)
    }

    /// Total number of stored tuples.
    pub fn size(&self) -> usize {
        self.regions.iter().map(|t| t.len()).sum()
    }
}

/// Midpoint of every coordinate cell selected by a labelling.
pub fn representative_point(gm: &FactorGraph, part: &Partition, a: &[Label]) -> Vec<f64> {
    let mut x = vec![0.0; gm.coords.len()];
    for (v, &l) in a.iter().enumerate() {
        for (&c, b) in gm.vars[v].coords.iter().zip(part.label_box(gm, v, l)) {
            x[c] = b.mid();
        }
    }
    x
}

/// Coordinate cells selected by a labelling.
pub fn assignment_boxes(gm: &FactorGraph, part: &Partition, a: &[Label]) -> Vec<Interval> {
    let mut x = vec![Interval::point(0.0); gm.coords.len()];
    for (v, &l) in a.iter().enumerate() {
        for (&c, b) in gm.vars[v].coords.iter().zip(part.label_box(gm, v, l)) {
            x[c] = b;
        }
    }
    x
}

/// Table over explicit tuples, sorted on construction.
pub fn table(node: NodeRef, scope: Vec<VarId>, mut rows: Vec<(Vec<Label>, f64)>) -> Table {
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows.dedup_by(|a, b| a.0 == b.0);
    let mut t = Table { node, scope, tuples: Vec::new(), cost: Vec::new(), verdict: Vec::new() };
    for (tu, c) in rows {
        t.tuples.extend_from_slice(&tu);
        t.cost.push(c);
        t.verdict.push(Verdict::Possible);
    }
    t
}
