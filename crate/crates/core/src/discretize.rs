//! Interval partitions of coordinate domains and the finite tables built on them.
//!
//! Each coordinate gets sorted breakpoints; cell `k` is the closed interval between
//! breakpoints `k` and `k + 1` (a singleton domain has one point cell). A variable
//! label is the mixed-radix number of its coordinates' cells, first coordinate most
//! significant, so sorting labels sorts by the first coordinate's cell.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{ConstraintId, CoordId, FactorGraph, FactorId, NodeRef, VarId};
use crate::interval::Interval;
use crate::relation::Verdict;
use crate::{Error, Result};

pub type Label = u32;

/// Breakpoints of `t` equal-width cells over `domain`.
pub fn partition_uniform(domain: Interval, t: usize) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::InvalidArgument("cell count must be at least 1".into()));
    }
    if !domain.is_finite() {
        return Err(Error::InvalidArgument("cannot partition an unbounded domain".into()));
    }
    if domain.is_point() {
        return Ok(vec![domain.lo]);
    }
    let w = domain.width();
    let mut cuts = Vec::with_capacity(t + 1);
    cuts.push(domain.lo);
    for k in 1..t {
        let c = domain.lo + w * (k as f64) / (t as f64);
        if c > *cuts.last().unwrap() && c < domain.hi {
            cuts.push(c);
        }
    }
    cuts.push(domain.hi);
    Ok(cuts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Breakpoints per coordinate.
    pub cuts: Vec<Vec<f64>>,
}

impl Partition {
    pub fn uniform(gm: &FactorGraph, t: usize) -> Result<Self> {
        let cuts = gm.coords.iter().map(|c| partition_uniform(c.domain, t)).collect::<Result<_>>()?;
        Ok(Partition { cuts })
    }

    pub fn from_cuts(cuts: Vec<Vec<f64>>) -> Result<Self> {
        for (c, b) in cuts.iter().enumerate() {
            if b.is_empty() || b.iter().any(|x| !x.is_finite()) || b.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument(format!("coordinate {c}: breakpoints must be finite and increasing")));
            }
        }
        Ok(Partition { cuts })
    }

    pub fn cells(&self, c: CoordId) -> usize {
        self.cuts[c].len().max(2) - 1
    }

    pub fn cell(&self, c: CoordId, k: usize) -> Interval {
        let b = &self.cuts[c];
        if b.len() == 1 {
            Interval::point(b[0])
        } else {
            Interval::new(b[k], b[k + 1])
        }
    }

    pub fn hull(&self, c: CoordId) -> Interval {
        let b = &self.cuts[c];
        Interval::new(b[0], b[b.len() - 1])
    }

    /// Cells of coordinate `c` whose closed interval meets `x`, as a range.
    pub fn overlapping(&self, c: CoordId, x: &Interval) -> core::ops::Range<usize> {
        let b = &self.cuts[c];
        if b.len() == 1 {
            return if x.contains(b[0]) { 0..1 } else { 0..0 };
        }
        let n = b.len() - 1;
        // first cell with hi >= x.lo, last cell with lo <= x.hi
        let first = b[1..].partition_point(|&h| h < x.lo);
        let end = b[..n].partition_point(|&l| l <= x.hi);
        if first >= end {
            0..0
        } else {
            first..end
        }
    }

    /// Bisects one cell of a coordinate.
    pub fn refine(&mut self, c: CoordId, k: usize) -> Result<()> {
        let cell = self.cell(c, k);
        let mid = cell.mid();
        if !(cell.lo < mid && mid < cell.hi) {
            return Err(Error::InvalidArgument(format!("coordinate {c} cell {k} has zero width")));
        }
        self.cuts[c].insert(k + 1, mid);
        Ok(())
    }

    pub fn refined(&self, c: CoordId, k: usize) -> Result<Partition> {
        let mut p = self.clone();
        p.refine(c, k)?;
        Ok(p)
    }

    pub fn labels(&self, gm: &FactorGraph, v: VarId) -> usize {
        gm.vars[v].coords.iter().map(|&c| self.cells(c)).product()
    }

    /// Coordinate cells of a variable label.
    pub fn decode(&self, gm: &FactorGraph, v: VarId, label: Label) -> Vec<usize> {
        let coords = &gm.vars[v].coords;
        let mut out = vec![0; coords.len()];
        let mut l = label as usize;
        for (k, &c) in coords.iter().enumerate().rev() {
            let n = self.cells(c);
            out[k] = l % n;
            l /= n;
        }
        out
    }

    pub fn encode(&self, gm: &FactorGraph, v: VarId, cells: &[usize]) -> Label {
        let mut l = 0usize;
        for (&c, &k) in gm.vars[v].coords.iter().zip(cells) {
            l = l * self.cells(c) + k;
        }
        l as Label
    }

    pub fn label_box(&self, gm: &FactorGraph, v: VarId, label: Label) -> Vec<Interval> {
        let cells = self.decode(gm, v, label);
        gm.vars[v].coords.iter().zip(cells).map(|(&c, k)| self.cell(c, k)).collect()
    }

    /// Checks coverage of the coordinate domains.
    pub fn check(&self, gm: &FactorGraph) -> Result<()> {
        if self.cuts.len() != gm.coords.len() {
            return Err(Error::InvalidArgument("partition does not match the graph".into()));
        }
        for (c, co) in gm.coords.iter().enumerate() {
            if self.hull(c) != co.domain {
                return Err(Error::InvalidArgument(format!("partition of {} does not cover its domain", co.name)));
            }
        }
        Ok(())
    }
}

/// Finite table of a factor or constraint node: sorted label tuples over `scope`,
/// one lower-bound cost and one verdict per tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub node: NodeRef,
    pub scope: Vec<VarId>,
    /// Row-major tuples, `scope.len()` labels each.
    pub tuples: Vec<Label>,
    pub cost: Vec<f64>,
    pub verdict: Vec<Verdict>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn tuple(&self, i: usize) -> &[Label] {
        let w = self.scope.len();
        &self.tuples[i * w..(i + 1) * w]
    }

    /// Index of a tuple, by binary search.
    pub fn find(&self, t: &[Label]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let m = (lo + hi) / 2;
            match self.tuple(m).cmp(t) {
                core::cmp::Ordering::Less => lo = m + 1,
                core::cmp::Ordering::Greater => hi = m,
                core::cmp::Ordering::Equal => return Some(m),
            }
        }
        None
    }
}

/// Lower-bound table of a cost factor over the product of its scope labels.
pub fn lower_bound_table(gm: &FactorGraph, f: FactorId, part: &Partition, cap: usize) -> Result<Table> {
    let fac = &gm.factors[f];
    let sizes: Vec<usize> = fac.scope.iter().map(|&v| part.labels(gm, v)).collect();
    let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).filter(|&n| n <= cap);
    let Some(total) = total else {
        return Err(Error::ResourceCap(format!("factor f{f} table exceeds {cap} entries")));
    };
    let w = fac.scope.len();
    let mut t = Table { node: NodeRef::Factor(f), scope: fac.scope.clone(), tuples: Vec::with_capacity(total * w), cost: Vec::with_capacity(total), verdict: vec![Verdict::Certain; total] };
    let mut cur = vec![0 as Label; w];
    let mut cell_of = vec![Interval::point(0.0); gm.coords.len()];
    let mut args = Vec::with_capacity(fac.args.len());
    for _ in 0..total {
        for (k, &v) in fac.scope.iter().enumerate() {
            for (&c, b) in gm.vars[v].coords.iter().zip(part.label_box(gm, v, cur[k])) {
                cell_of[c] = b;
            }
        }
        args.clear();
        args.extend(fac.args.iter().map(|&c| cell_of[c]));
        let lb = fac.func.lower_bound(&args).map_err(|_| Error::InvalidArgument(format!("factor f{f} not lower-bounded")))?;
        t.tuples.extend_from_slice(&cur);
        t.cost.push(lb);
        for k in (0..w).rev() {
            cur[k] += 1;
            if (cur[k] as usize) < sizes[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    Ok(t)
}

struct Enum<'a> {
    gm: &'a FactorGraph,
    part: &'a Partition,
    /// Local coordinate order: scope variables in order, their coordinates in order.
    coords: Vec<CoordId>,
    /// Blocks as (relation index, local positions).
    blocks: Vec<(usize, Vec<usize>)>,
    /// Blocks touching each local coordinate.
    touching: Vec<Vec<usize>>,
    /// Position after which each block is fully fixed.
    closes_at: Vec<Vec<usize>>,
    cells: Vec<usize>,
    boxes: Vec<Interval>,
    out_cells: Vec<Vec<usize>>,
    out_verdict: Vec<Verdict>,
    cap: usize,
    work: usize,
    work_cap: usize,
}

impl Enum<'_> {
    fn relation(&self, cid: ConstraintId, b: usize) -> &crate::relation::Relation {
        &self.gm.constraints[cid].blocks[self.blocks[b].0].relation
    }

    fn block_box(&self, b: usize) -> Vec<Interval> {
        self.blocks[b].1.iter().map(|&p| self.boxes[p]).collect()
    }

    fn run(&mut self, cid: ConstraintId, depth: usize) -> Result<()> {
        self.work += 1;
        if self.work > self.work_cap {
            return Err(Error::ResourceCap(format!("constraint c{cid} enumeration exceeds {} steps", self.work_cap)));
        }
        if depth == self.coords.len() {
            let mut v = Verdict::Certain;
            for b in 0..self.blocks.len() {
                v = v.min(self.relation(cid, b).test(&self.block_box(b)));
                if v == Verdict::Infeasible {
                    return Ok(());
                }
            }
            if self.out_verdict.len() >= self.cap {
                return Err(Error::ResourceCap(format!("constraint c{cid} has more than {} feasible tuples", self.cap)));
            }
            self.out_cells.push(self.cells.clone());
            self.out_verdict.push(v);
            return Ok(());
        }
        let c = self.coords[depth];
        let full = self.part.hull(c);
        let mut range = full;
        for i in 0..self.touching[depth].len() {
            let b = self.touching[depth][i];
            let pos = self.blocks[b].1.iter().position(|&p| p == depth).unwrap();
            match self.relation(cid, b).project(&self.block_box(b), pos) {
                Some(r) => match r.intersect(&range) {
                    Some(x) => range = x,
                    None => return Ok(()),
                },
                None => return Ok(()),
            }
        }
        for k in self.part.overlapping(c, &range) {
            self.cells[depth] = k;
            self.boxes[depth] = self.part.cell(c, k);
            let mut ok = true;
            for i in 0..self.closes_at[depth].len() {
                let b = self.closes_at[depth][i];
                if self.relation(cid, b).test(&self.block_box(b)) == Verdict::Infeasible {
                    ok = false;
                    break;
                }
            }
            if ok {
                self.run(cid, depth + 1)?;
            }
        }
        self.boxes[depth] = full;
        Ok(())
    }
}

/// Label tuples of a constraint node that the interval tests cannot refute, with
/// the lower bound of its attached costs. At most `cap` tuples.
pub fn feasible_tuples(gm: &FactorGraph, cid: ConstraintId, part: &Partition, cap: usize) -> Result<Table> {
    let con = &gm.constraints[cid];
    let coords: Vec<CoordId> = con.scope.iter().flat_map(|&v| gm.vars[v].coords.iter().copied()).collect();
    let local = |c: CoordId| coords.iter().position(|&x| x == c).expect("block coordinate in scope");
    let blocks: Vec<(usize, Vec<usize>)> = con.blocks.iter().enumerate().map(|(i, b)| (i, b.coords.iter().map(|&c| local(c)).collect())).collect();
    let mut touching = vec![Vec::new(); coords.len()];
    let mut closes_at = vec![Vec::new(); coords.len()];
    for (b, (_, pos)) in blocks.iter().enumerate() {
        for &p in pos {
            if !touching[p].contains(&b) {
                touching[p].push(b);
            }
        }
        if let Some(&last) = pos.iter().max() {
            closes_at[last].push(b);
        }
    }
    let boxes = coords.iter().map(|&c| part.hull(c)).collect();
    let mut e = Enum {
        gm,
        part,
        blocks,
        touching,
        closes_at,
        cells: vec![0; coords.len()],
        boxes,
        out_cells: Vec::new(),
        out_verdict: Vec::new(),
        cap,
        work: 0,
        work_cap: cap.saturating_mul(64),
        coords,
    };
    e.run(cid, 0)?;

    let w = con.scope.len();
    let mut t = Table { node: NodeRef::Constraint(cid), scope: con.scope.clone(), tuples: Vec::with_capacity(e.out_verdict.len() * w), cost: Vec::with_capacity(e.out_verdict.len()), verdict: e.out_verdict };
    let mut cell_of = vec![Interval::point(0.0); gm.coords.len()];
    let mut args = Vec::new();
    for cells in &e.out_cells {
        let mut at = 0;
        for &v in &con.scope {
            let n = gm.vars[v].coords.len();
            t.tuples.push(part.encode(gm, v, &cells[at..at + n]));
            for (j, &c) in gm.vars[v].coords.iter().enumerate() {
                cell_of[c] = part.cell(c, cells[at + j]);
            }
            at += n;
        }
        let mut cost = 0.0;
        for a in &con.costs {
            args.clear();
            args.extend(a.args.iter().map(|&c| cell_of[c]));
            cost += a.func.lower_bound(&args).map_err(|_| Error::InvalidArgument(format!("cost term of c{cid} not lower-bounded")))?;
        }
        t.cost.push(cost);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostFunction, FactorFn};
    use crate::graph::{Block, ConstraintKind};
    use crate::physics::PhysicsKind;
    use crate::relation::Relation;

    #[test]
    fn uniform_cells() {
        assert_eq!(partition_uniform(Interval::new(0.0, 1.0), 2).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(partition_uniform(Interval::point(5.0), 7).unwrap(), vec![5.0]);
        let c = partition_uniform(Interval::new(-1.0, 3.0), 4).unwrap();
        assert!(c.windows(2).all(|w| w[1] - w[0] == 1.0));
        assert!(partition_uniform(Interval::new(0.0, 1.0), 0).is_err());
    }

    #[test]
    fn refine_nests() {
        let mut p = Partition { cuts: vec![vec![0.0, 1.0]] };
        p.refine(0, 0).unwrap();
        assert_eq!(p.cuts[0], vec![0.0, 0.5, 1.0]);
        p.refine(0, 0).unwrap();
        assert_eq!(p.cuts[0], vec![0.0, 0.25, 0.5, 1.0]);
        let q = Partition { cuts: vec![vec![2.0]] };
        assert!(q.refined(0, 0).is_err());
    }

    #[test]
    fn overlap_ranges() {
        let p = Partition { cuts: vec![vec![0.0, 1.0, 2.0, 3.0]] };
        assert_eq!(p.overlapping(0, &Interval::new(1.0, 1.0)), 0..2);
        assert_eq!(p.overlapping(0, &Interval::new(1.5, 2.5)), 1..3);
        assert_eq!(p.overlapping(0, &Interval::new(3.5, 4.0)), 0..0);
    }

    fn one_var(t: usize, f: CostFunction, dom: Interval) -> Table {
        let mut gm = FactorGraph::new();
        let v = gm.add_variable("x", &[("x", dom)]);
        gm.add_cost_factor(FactorFn::Cost(f), vec![gm.vars[v].coords[0]]).unwrap();
        let p = Partition::uniform(&gm, t).unwrap();
        lower_bound_table(&gm, 0, &p, 1000).unwrap()
    }

    #[test]
    fn square_tables() {
        let sq = CostFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 };
        let t = one_var(2, sq.clone(), Interval::new(-1.0, 1.0));
        assert!(t.cost.iter().all(|&c| c <= 0.0 && c > -1e-14));
        let t = one_var(4, sq, Interval::new(-1.0, 1.0));
        let want = [0.25, 0.0, 0.0, 0.25];
        for (c, w) in t.cost.iter().zip(want) {
            assert!(*c <= w && w - c < 1e-14);
        }
        let t = one_var(2, CostFunction::Quadratic { a: 1.0, b: -2.0, c: 1.0 }, Interval::new(0.0, 2.0));
        assert!(t.cost.iter().all(|&c| c <= 0.0 && c > -1e-13), "{:?}", t.cost);
    }

    #[test]
    fn gas_cell_refuted() {
        let mut gm = FactorGraph::new();
        let a = gm.add_variable("a", &[("pi_a", Interval::new(0.0, 4.0)), ("phi_a", Interval::new(3.0, 4.0))]);
        let b = gm.add_variable("b", &[("pi_b", Interval::new(0.0, 4.0)), ("phi_b", Interval::new(-4.0, -3.0))]);
        let c = |v: VarId, k: usize| gm.vars[v].coords[k];
        let coords = vec![c(a, 0), c(b, 0), c(a, 1), c(b, 1)];
        gm.add_constraint(
            ConstraintKind::Generic,
            vec![Block { relation: Relation::Edge { physics: PhysicsKind::Gas { gamma: 1.0, offset: 0.0 } }, coords }],
            vec![],
            &[],
        )
        .unwrap();
        let p = Partition::uniform(&gm, 1).unwrap();
        assert!(feasible_tuples(&gm, 0, &p, 100).unwrap().is_empty());
    }

    #[test]
    fn conservation_cell_kept() {
        let mut gm = FactorGraph::new();
        let q = gm.add_variable("q", &[("q", Interval::new(0.0, 1.0))]);
        let f = gm.add_variable("f", &[("phi", Interval::new(0.0, 1.0))]);
        let coords = vec![gm.vars[q].coords[0], gm.vars[f].coords[0]];
        gm.add_constraint(ConstraintKind::Generic, vec![Block { relation: Relation::Linear { coeffs: vec![1.0, -1.0], rhs: 0.0 }, coords }], vec![], &[]).unwrap();
        let p = Partition::uniform(&gm, 1).unwrap();
        assert_eq!(feasible_tuples(&gm, 0, &p, 100).unwrap().len(), 1);
        let p = Partition::uniform(&gm, 4).unwrap();
        let t = feasible_tuples(&gm, 0, &p, 100).unwrap();
        // diagonal plus the two neighbouring cells sharing an endpoint
        assert_eq!(t.len(), 4 + 3 + 3);
        assert!(t.find(&[2, 3]).is_some() && t.find(&[0, 3]).is_none());
    }

    #[test]
    fn tuple_cap() {
        let mut gm = FactorGraph::new();
        let x = gm.add_variable("x", &[("x", Interval::new(0.0, 1.0))]);
        let y = gm.add_variable("y", &[("y", Interval::new(0.0, 1.0))]);
        let coords = vec![gm.vars[x].coords[0], gm.vars[y].coords[0]];
        gm.add_constraint(ConstraintKind::Generic, vec![Block { relation: Relation::AbsSumBand { lower: 0.0, upper: 10.0 }, coords }], vec![], &[]).unwrap();
        let p = Partition::uniform(&gm, 10).unwrap();
        assert!(matches!(feasible_tuples(&gm, 0, &p, 50), Err(Error::ResourceCap(_))));
        assert_eq!(feasible_tuples(&gm, 0, &p, 100).unwrap().len(), 100);
    }
}
