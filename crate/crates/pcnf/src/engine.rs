//! LP engine selection: the dense simplex of `pcnf-core` for small programs and the
//! sparse revised simplex of `microlp` for large ones.

use pcnf_core::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, RowKind};
use pcnf_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpEngine {
    Auto,
    Dense,
    Sparse,
}

/// Tableau entries above which `Auto` picks the sparse engine.
pub const DENSE_LIMIT: usize = 2_000_000;

impl LpEngine {
    pub fn name(&self) -> &'static str {
        match self {
            LpEngine::Auto => "auto",
            LpEngine::Dense => "dense",
            LpEngine::Sparse => "sparse",
        }
    }

    /// The engine `Auto` resolves to for this program.
    pub fn resolve(self, lp: &LinearProgram) -> LpEngine {
        match self {
            LpEngine::Auto if lp.cols.len().saturating_mul(lp.rows.len()) > DENSE_LIMIT => LpEngine::Sparse,
            LpEngine::Auto => LpEngine::Dense,
            e => e,
        }
    }
}

pub fn solve(lp: &LinearProgram, engine: LpEngine) -> Result<LpSolution> {
    match engine.resolve(lp) {
        LpEngine::Sparse => solve_sparse(lp),
        _ => solve_lp(lp),
    }
}

fn solve_sparse(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let mut p = microlp::Problem::new(microlp::OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..lp.cols.len()).map(|j| p.add_var(lp.cost[j], (0.0, lp.upper[j]))).collect();
    for r in &lp.rows {
        let e: Vec<_> = r.coeffs.iter().map(|&(c, a)| (vars[c], a)).collect();
        let op = match r.kind {
            RowKind::Eq => microlp::ComparisonOp::Eq,
            RowKind::Le => microlp::ComparisonOp::Le,
            RowKind::Ge => microlp::ComparisonOp::Ge,
        };
        p.add_constraint(&e[..], op, r.rhs);
    }
    let empty = |status| LpSolution { status, objective: f64::NAN, x: vec![0.0; lp.cols.len()], iterations: 0 };
    match p.solve() {
        Ok(s) => {
            let x: Vec<f64> = vars.iter().map(|&v| *s.var_value(v)).collect();
            Ok(LpSolution { status: LpStatus::Optimal, objective: lp.objective(&x), x, iterations: 0 })
        }
        Err(microlp::Error::Infeasible) => Ok(empty(LpStatus::Infeasible)),
        Err(microlp::Error::Unbounded) => Ok(empty(LpStatus::Unbounded)),
        Err(microlp::Error::InternalError(m)) => Err(Error::Internal(format!("sparse simplex: {m}"))),
    }
}
