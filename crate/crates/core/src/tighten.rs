//! Local bound tightening: shrink each coordinate to the hull of the sub-cells that
//! no incident block can refute, sweep until a fixed point.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretize::partition_uniform;
use crate::graph::{CoordId, FactorGraph};
use crate::interval::Interval;
use crate::relation::{Relation, Verdict};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Every update in a sweep reads the previous sweep's bounds.
    Jacobi,
    /// Updates are visible immediately.
    GaussSeidel,
}

#[derive(Clone, Debug)]
pub struct TightenOptions {
    /// Sub-cells per coordinate in the local problem.
    pub m: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub schedule: Schedule,
}

impl Default for TightenOptions {
    fn default() -> Self {
        TightenOptions { m: 16, tol: 1e-6, max_sweeps: 50, schedule: Schedule::Jacobi }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsState {
    pub bounds: Vec<Interval>,
    pub sweeps: usize,
    /// Largest endpoint move of each sweep.
    pub changes: Vec<f64>,
}

impl BoundsState {
    pub fn new(gm: &FactorGraph) -> Self {
        BoundsState { bounds: gm.domains(), sweeps: 0, changes: Vec::new() }
    }
}

/// `(relation, coordinates)` of every block, and the blocks touching each coordinate.
fn incidence(gm: &FactorGraph) -> (Vec<(&Relation, &[CoordId])>, Vec<Vec<usize>>) {
    let mut blocks = Vec::new();
    let mut touch = vec![Vec::new(); gm.coords.len()];
    for con in &gm.constraints {
        for b in &con.blocks {
            let k = blocks.len();
            blocks.push((&b.relation, b.coords.as_slice()));
            for &c in &b.coords {
                if !touch[c].contains(&k) {
                    touch[c].push(k);
                }
            }
        }
    }
    (blocks, touch)
}

/// Contracts a block box a few rounds; `None` when refuted.
fn refute(rel: &Relation, b: &mut [Interval]) -> bool {
    for _ in 0..2 {
        for p in 0..b.len() {
            match rel.project(b, p) {
                Some(x) => b[p] = x,
                None => return true,
            }
        }
    }
    rel.test(b) == Verdict::Infeasible
}

fn tighten_coord(blocks: &[(&Relation, &[CoordId])], touch: &[usize], bounds: &[Interval], c: CoordId, m: usize) -> Result<Interval> {
    let mut direct = bounds[c];
    let mut boxes: Vec<Vec<Interval>> = Vec::with_capacity(touch.len());
    for &k in touch {
        let (rel, coords) = blocks[k];
        let b: Vec<Interval> = coords.iter().map(|&x| bounds[x]).collect();
        let pos = coords.iter().position(|&x| x == c).unwrap();
        direct = rel.project(&b, pos).and_then(|p| p.intersect(&direct)).ok_or(Error::LocallyInfeasible { coord: c })?;
        boxes.push(b);
    }
    if direct.is_point() || touch.is_empty() {
        return Ok(direct);
    }
    let cuts = partition_uniform(direct, m)?;
    let mut hull: Option<Interval> = None;
    for w in cuts.windows(2) {
        let cell = Interval::new(w[0], w[1]);
        let alive = touch.iter().zip(&boxes).all(|(&k, b)| {
            let (rel, coords) = blocks[k];
            let mut b = b.clone();
            for (q, &x) in coords.iter().enumerate() {
                if x == c {
                    b[q] = cell;
                }
            }
            !refute(rel, &mut b)
        });
        if alive {
            hull = Some(hull.map_or(cell, |h| h.hull(&cell)));
        }
    }
    hull.and_then(|h| h.intersect(&direct)).ok_or(Error::LocallyInfeasible { coord: c })
}

/// New interval for coordinate `c` from the blocks incident to it.
pub fn tighten_once(gm: &FactorGraph, bounds: &[Interval], c: CoordId, m: usize) -> Result<Interval> {
    if m < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    let (blocks, touch) = incidence(gm);
    tighten_coord(&blocks, &touch[c], bounds, c, m)
}

/// Sweeps over all coordinates in id order until no endpoint moves by `tol`.
pub fn tighten_all(gm: &FactorGraph, mut state: BoundsState, opts: &TightenOptions) -> Result<BoundsState> {
    if opts.max_sweeps == 0 || opts.m < 2 {
        return Err(Error::InvalidArgument("need at least one sweep and resolution 2".into()));
    }
    let (blocks, touch) = incidence(gm);
    for _ in 0..opts.max_sweeps {
        let old = state.bounds.clone();
        for c in 0..old.len() {
            let src = match opts.schedule {
                Schedule::Jacobi => &old,
                Schedule::GaussSeidel => &state.bounds,
            };
            let r = tighten_coord(&blocks, &touch[c], src, c, opts.m)?;
            state.bounds[c] = r.intersect(&state.bounds[c]).ok_or(Error::LocallyInfeasible { coord: c })?;
        }
        let mut change = 0.0f64;
        for (n, o) in state.bounds.iter().zip(&old) {
            if !o.contains_interval(n) {
                return Err(Error::Internal(format!("tightening widened {o} to {n}")));
            }
            change = change.max(n.lo - o.lo).max(o.hi - n.hi);
        }
        state.sweeps += 1;
        state.changes.push(change);
        if change < opts.tol {
            break;
        }
    }
    Ok(state)
}

/// Brute-force global tightening: hull of every box of `m` cells per coordinate
/// that no block refutes. For graphs with at most four variables.
pub fn global_tighten(gm: &FactorGraph, m: usize, cap: usize) -> Result<Vec<Interval>> {
    if gm.vars.len() > 4 {
        return Err(Error::ResourceCap("global tightening is limited to four variables".into()));
    }
    let n = gm.coords.len();
    let cuts: Vec<Vec<f64>> = gm.coords.iter().map(|c| partition_uniform(c.domain, m)).collect::<Result<_>>()?;
    let cells = |c: usize| cuts[c].len().max(2) - 1;
    let cell = |c: usize, k: usize| if cuts[c].len() == 1 { Interval::point(cuts[c][0]) } else { Interval::new(cuts[c][k], cuts[c][k + 1]) };
    let (blocks, _) = incidence(gm);
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, (_, coords)) in blocks.iter().enumerate() {
        if let Some(&last) = coords.iter().max() {
            closes[last].push(k);
        }
    }
    let mut hull: Vec<Option<Interval>> = vec![None; n];
    let mut cur: Vec<Interval> = gm.domains();
    let mut work = 0usize;
    #[allow(clippy::too_many_arguments)]
    fn go(
        d: usize,
        n: usize,
        cur: &mut Vec<Interval>,
        hull: &mut Vec<Option<Interval>>,
        closes: &[Vec<usize>],
        blocks: &[(&Relation, &[CoordId])],
        cells: &dyn Fn(usize) -> usize,
        cell: &dyn Fn(usize, usize) -> Interval,
        work: &mut usize,
        cap: usize,
    ) -> Result<()> {
        if d == n {
            for (h, c) in hull.iter_mut().zip(cur.iter()) {
                *h = Some(h.map_or(*c, |x| x.hull(c)));
            }
            return Ok(());
        }
        for k in 0..cells(d) {
            *work += 1;
            if *work > cap {
                return Err(Error::ResourceCap(format!("global tightening exceeds {cap} boxes")));
            }
            cur[d] = cell(d, k);
            let ok = closes[d].iter().all(|&b| {
                let (rel, coords) = blocks[b];
                let bx: Vec<Interval> = coords.iter().map(|&x| cur[x]).collect();
                rel.test(&bx) != Verdict::Infeasible
            });
            if ok {
                go(d + 1, n, cur, hull, closes, blocks, cells, cell, work, cap)?;
            }
        }
        Ok(())
    }
    go(0, n, &mut cur, &mut hull, &closes, &blocks, &cells, &cell, &mut work, cap)?;
    hull.into_iter().enumerate().map(|(c, h)| h.ok_or(Error::LocallyInfeasible { coord: c })).collect()
}
