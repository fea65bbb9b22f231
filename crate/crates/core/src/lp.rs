//! Linear programs: the model, a dense two-phase simplex, the belief LP of a
//! region model and its super-node hierarchy.

mod belief;
mod hierarchy;
mod simplex;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use belief::{build_int_part_lp, BeliefLp, ColumnRole};
pub use hierarchy::{build_hierarchy_lp, generate_supernodes, Level, SuperNodeSet, DEFAULT_SUPERNODE_CAP};
pub use simplex::{solve_lp, SimplexOptions};

/// Feasibility tolerance of the simplex and of solution checks.
pub const FEAS_TOL: f64 = 1e-9;
/// Tolerance of the integrality check.
pub const INT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    /// `(column, coefficient)` pairs, columns unique.
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `min cost·x` subject to the rows and `0 <= x <= upper`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub name: String,
    pub cols: Vec<String>,
    pub cost: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(name: &str) -> Self {
        LinearProgram { name: String::from(name), ..Default::default() }
    }

    pub fn add_col(&mut self, name: String, cost: f64, upper: f64) -> usize {
        self.cols.push(name);
        self.cost.push(cost);
        self.upper.push(upper);
        self.cols.len() - 1
    }

    pub fn add_row(&mut self, name: String, kind: RowKind, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(Row { name, kind, coeffs, rhs });
        self.rows.len() - 1
    }

    /// Rejects duplicate or empty names, bad column references and non-finite data.
    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in self.cols.iter().chain(self.rows.iter().map(|r| &r.name)) {
            if n.is_empty() || n.contains(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("invalid name {n:?}")));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate name {n}")));
            }
        }
        if self.cost.len() != self.cols.len() || self.upper.len() != self.cols.len() {
            return Err(Error::InvalidArgument("column data length mismatch".into()));
        }
        if self.cost.iter().any(|c| !c.is_finite()) || self.upper.iter().any(|u| u.is_nan() || *u < 0.0) {
            return Err(Error::InvalidArgument("non-finite cost or negative upper bound".into()));
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.coeffs.iter().any(|(c, a)| *c >= self.cols.len() || !a.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {} is malformed", r.name)));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for (j, &xj) in x.iter().enumerate() {
            v = v.max(-xj).max(xj - self.upper[j]);
        }
        for r in &self.rows {
            let s: f64 = r.coeffs.iter().map(|&(c, a)| a * x[c]).sum();
            let d = match r.kind {
                RowKind::Eq => (s - r.rhs).abs(),
                RowKind::Le => s - r.rhs,
                RowKind::Ge => r.rhs - s,
            };
            v = v.max(d);
        }
        v
    }

    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn name(&self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; meaningful only when optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

/// Columns whose value is not within `tol` of 0 or 1. Empty means integral.
pub fn check_integrality(sol: &LpSolution, tol: f64) -> (bool, Vec<usize>) {
    let frac: Vec<usize> = sol.x.iter().enumerate().filter(|(_, &v)| v.min((1.0 - v).abs()) > tol).map(|(j, _)| j).collect();
    (frac.is_empty(), frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn duplicate_names_rejected() {
        let mut lp = LinearProgram::new("t");
        lp.add_col("x".into(), 0.0, 1.0);
        lp.add_col("x".into(), 0.0, 1.0);
        assert!(lp.check().is_err());
    }

    #[test]
    fn integrality() {
        let s = LpSolution { status: LpStatus::Optimal, objective: 0.0, x: vec![1.0, 0.0], iterations: 0 };
        assert_eq!(check_integrality(&s, INT_TOL), (true, vec![]));
        let s = LpSolution { x: vec![0.5, 0.5], ..s };
        assert_eq!(check_integrality(&s, INT_TOL), (false, vec![0, 1]));
    }
}
