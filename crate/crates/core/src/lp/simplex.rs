//! Dense two-phase primal simplex on the standard-form tableau.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots it falls back to
//! Bland's rule until the objective moves again, which rules out cycling.
//! Artificial columns are never stored: an artificial that leaves the basis can
//! not re-enter, so only its row membership matters.

use alloc::vec;
use alloc::vec::Vec;

use super::{LinearProgram, LpSolution, LpStatus, RowKind, FEAS_TOL};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Pivot cap; `None` scales with the problem size.
    pub max_iterations: Option<usize>,
    pub tol: f64,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub degenerate_streak: usize,
    /// Use Bland's rule throughout.
    pub bland_only: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iterations: None, tol: FEAS_TOL, degenerate_streak: 30, bland_only: false }
    }
}

const ART: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;

struct Tableau {
    m: usize,
    /// Columns excluding the right-hand side.
    n: usize,
    /// Row-major, `n + 1` entries per row, rhs last.
    a: Vec<f64>,
    /// Reduced costs, negated objective last.
    d: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.n + 1) + self.n]
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.n + 1;
        let p = self.a[r * w + j];
        let row: Vec<f64> = self.a[r * w..(r + 1) * w].iter().map(|v| v / p).collect();
        let nz: Vec<usize> = (0..w).filter(|&k| row[k] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * w + j];
            if f == 0.0 {
                continue;
            }
            let base = i * w;
            for &k in &nz {
                self.a[base + k] -= f * row[k];
            }
            self.a[base + j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for &k in &nz {
                self.d[k] -= f * row[k];
            }
            self.d[j] = 0.0;
        }
        self.a[r * w..(r + 1) * w].copy_from_slice(&row);
        self.a[r * w + j] = 1.0;
        self.basis[r] = j;
    }

    /// Runs pivots until optimal (`Ok(true)`) or unbounded (`Ok(false)`).
    fn run(&mut self, allowed: usize, opts: &SimplexOptions) -> Result<bool> {
        let mut streak = 0;
        let mut bland = opts.bland_only;
        let mut in_basis = vec![false; self.n];
        for &b in &self.basis {
            if b != ART {
                in_basis[b] = true;
            }
        }
        loop {
            let mut enter = None;
            let mut best = -opts.tol;
            for j in 0..allowed {
                if in_basis[j] {
                    continue;
                }
                let dj = self.d[j];
                if dj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(j) = enter else { return Ok(true) };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, j);
                if a <= PIVOT_TOL {
                    continue;
                }
                let r = self.rhs(i).max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if r < ratio - 1e-12 {
                            true
                        } else if r <= ratio + 1e-12 {
                            if bland {
                                // artificials first, then lowest column index
                                let key = |b: usize| if b == ART { 0 } else { b + 1 };
                                key(self.basis[i]) < key(self.basis[l])
                            } else {
                                a > self.at(l, j)
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    ratio = r;
                }
            }
            let Some(r) = leave else { return Ok(false) };
            if ratio <= opts.tol {
                streak += 1;
                if streak >= opts.degenerate_streak {
                    bland = true;
                }
            } else {
                streak = 0;
                bland = opts.bland_only;
            }
            let old = self.basis[r];
            if old != ART {
                in_basis[old] = false;
            }
            self.pivot(r, j);
            in_basis[j] = true;
            self.iterations += 1;
            if self.iterations > self.cap {
                return Err(Error::IterationCap { iterations: self.iterations });
            }
        }
    }

    fn drop_rows(&mut self, keep: &[bool]) {
        let w = self.n + 1;
        let mut a = Vec::with_capacity(self.a.len());
        let mut basis = Vec::new();
        for i in 0..self.m {
            if keep[i] {
                a.extend_from_slice(&self.a[i * w..(i + 1) * w]);
                basis.push(self.basis[i]);
            }
        }
        self.a = a;
        self.basis = basis;
        self.m = self.basis.len();
    }
}

/// Solves with default options.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.cols.len();

    // an upper bound is implied by a nonnegative equality row that caps the column
    let mut implied = vec![false; n];
    for r in &lp.rows {
        if r.kind == RowKind::Eq && r.rhs >= 0.0 && r.coeffs.iter().all(|&(_, a)| a >= 0.0) {
            for &(c, a) in &r.coeffs {
                if a > 0.0 && r.rhs / a <= lp.upper[c] {
                    implied[c] = true;
                }
            }
        }
    }
    let mut rows: Vec<(RowKind, Vec<(usize, f64)>, f64)> = lp.rows.iter().map(|r| (r.kind, r.coeffs.clone(), r.rhs)).collect();
    for j in 0..n {
        if !implied[j] && lp.upper[j].is_finite() {
            rows.push((RowKind::Le, vec![(j, 1.0)], lp.upper[j]));
        }
    }
    let slacks = rows.iter().filter(|r| r.0 != RowKind::Eq).count();
    let m = rows.len();
    let nn = n + slacks;
    let w = nn + 1;
    let mut a = vec![0.0; m * w];
    let mut basis = vec![ART; m];
    let mut s = n;
    for (i, (kind, coeffs, rhs)) in rows.iter().enumerate() {
        for &(c, v) in coeffs {
            a[i * w + c] += v;
        }
        a[i * w + nn] = *rhs;
        let mut slack = None;
        match kind {
            RowKind::Eq => {}
            RowKind::Le => {
                a[i * w + s] = 1.0;
                slack = Some(s);
                s += 1;
            }
            RowKind::Ge => {
                a[i * w + s] = -1.0;
                slack = Some(s);
                s += 1;
            }
        }
        if *rhs < 0.0 {
            for v in &mut a[i * w..(i + 1) * w] {
                *v = -*v;
            }
        }
        if let Some(sl) = slack {
            if a[i * w + sl] == 1.0 {
                basis[i] = sl;
            }
        }
    }
    let cap = opts.max_iterations.unwrap_or(200_000 + 50 * (m + nn));
    let mut t = Tableau { m, n: nn, a, d: vec![0.0; w], basis, iterations: 0, cap };

    // phase 1: minimise the sum of artificials
    let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    for i in 0..m {
        if t.basis[i] == ART {
            for k in 0..w {
                t.d[k] -= t.a[i * w + k];
            }
        }
    }
    if t.basis.iter().any(|&b| b == ART) {
        let ok = t.run(nn, opts)?;
        if !ok {
            return Err(Error::Internal("phase 1 unbounded".into()));
        }
        let infeas = -t.d[nn];
        if infeas > opts.tol * scale {
            return Ok(LpSolution { status: LpStatus::Infeasible, objective: f64::NAN, x: vec![0.0; n], iterations: t.iterations });
        }
        // drive remaining artificials out, dropping redundant rows
        let mut keep = vec![true; t.m];
        let mut in_basis = vec![false; nn];
        for &b in &t.basis {
            if b != ART {
                in_basis[b] = true;
            }
        }
        for i in 0..t.m {
            if t.basis[i] != ART {
                continue;
            }
            let mut best = None;
            let mut mag = 1e-7;
            for j in 0..nn {
                let v = t.at(i, j).abs();
                if v > mag && !in_basis[j] {
                    mag = v;
                    best = Some(j);
                }
            }
            match best {
                Some(j) => {
                    t.pivot(i, j);
                    in_basis[j] = true;
                }
                None => keep[i] = false,
            }
        }
        if keep.iter().any(|&k| !k) {
            t.drop_rows(&keep);
        }
    }

    // phase 2
    let cost = |j: usize| if j < n { lp.cost[j] } else { 0.0 };
    for k in 0..w {
        t.d[k] = if k < nn { cost(k) } else { 0.0 };
    }
    for i in 0..t.m {
        let cb = cost(t.basis[i]);
        if cb != 0.0 {
            for k in 0..w {
                t.d[k] -= cb * t.a[i * w + k];
            }
        }
    }
    let bounded = t.run(nn, opts)?;
    let mut x = vec![0.0; n];
    for i in 0..t.m {
        let b = t.basis[i];
        if b < n {
            x[b] = t.rhs(i).max(0.0);
        }
    }
    if !bounded {
        return Ok(LpSolution { status: LpStatus::Unbounded, objective: f64::NEG_INFINITY, x, iterations: t.iterations });
    }
    Ok(LpSolution { status: LpStatus::Optimal, objective: lp.objective(&x), x, iterations: t.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn lp2(costs: [f64; 2]) -> LinearProgram {
        let mut lp = LinearProgram::new("t");
        let a = lp.add_col(String::from("a"), costs[0], 1.0);
        let b = lp.add_col(String::from("b"), costs[1], 1.0);
        lp.add_row(String::from("norm"), RowKind::Eq, vec![(a, 1.0), (b, 1.0)], 1.0);
        lp
    }

    #[test]
    fn normalization_only() {
        let s = solve_lp(&lp2([0.0, 0.5])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.x, vec![1.0, 0.0]);
    }

    #[test]
    fn contradictory_equalities() {
        let mut lp = lp2([0.0, 0.0]);
        lp.add_row(String::from("c2"), RowKind::Eq, vec![(0, 1.0), (1, 1.0)], 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn inequalities_and_bounds() {
        // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, x <= 1.5
        let mut lp = LinearProgram::new("t");
        let x = lp.add_col(String::from("x"), -1.0, 1.5);
        let y = lp.add_col(String::from("y"), -1.0, f64::INFINITY);
        lp.add_row(String::from("r1"), RowKind::Le, vec![(x, 1.0), (y, 2.0)], 4.0);
        lp.add_row(String::from("r2"), RowKind::Le, vec![(x, 3.0), (y, 1.0)], 6.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective + 2.75).abs() < 1e-12, "{s:?}");
        // y >= 5 is infeasible with r1
        lp.add_row(String::from("r3"), RowKind::Ge, vec![(y, 1.0)], 5.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_reported() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_col(String::from("x"), -1.0, f64::INFINITY);
        lp.add_row(String::from("r"), RowKind::Ge, vec![(x, 1.0)], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_dropped() {
        let mut lp = lp2([1.0, 2.0]);
        lp.add_row(String::from("dup"), RowKind::Eq, vec![(0, 2.0), (1, 2.0)], 2.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!((s.status, s.objective), (LpStatus::Optimal, 1.0));
    }
}
