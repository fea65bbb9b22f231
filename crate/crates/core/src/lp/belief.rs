use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{LinearProgram, RowKind};
use crate::discretize::Label;
use crate::graph::VarId;
use crate::region::RegionModel;
use crate::Result;

/// What a belief column stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRole {
    /// `b_i(a)` of a variable label.
    Single { var: VarId, label: Label },
    /// `b_r(a_r)` of a region tuple.
    Region { region: usize, tuple: usize },
    /// Joint belief of a super-node tuple.
    Super { set: usize, tuple: Vec<Label> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefLp {
    pub lp: LinearProgram,
    pub roles: Vec<ColumnRole>,
}

impl BeliefLp {
    /// Belief of each variable label, from a solution vector.
    pub fn singles(&self, x: &[f64]) -> Vec<(VarId, Label, f64)> {
        self.roles
            .iter()
            .zip(x)
            .filter_map(|(r, &v)| match r {
                ColumnRole::Single { var, label } => Some((*var, *label, v)),
                _ => None,
            })
            .collect()
    }

    /// Label with the largest belief per variable (lowest label on ties).
    pub fn incumbent(&self, x: &[f64], vars: usize) -> Vec<Label> {
        let mut best: Vec<(f64, Label)> = (0..vars).map(|_| (f64::NEG_INFINITY, 0)).collect();
        for (r, &v) in self.roles.iter().zip(x) {
            let (var, label) = match r {
                ColumnRole::Single { var, label } => (*var, *label),
                _ => continue,
            };
            // labels come in ascending order, so a strict improvement keeps the lowest on ties
            if v > best[var].0 + 1e-9 {
                best[var] = (v, label);
            }
        }
        best.into_iter().map(|(_, l)| l).collect()
    }
}

pub(crate) fn label_list(t: &[Label]) -> String {
    let mut s = String::new();
    for (k, l) in t.iter().enumerate() {
        if k > 0 {
            s.push('.');
        }
        s.push_str(&format!("{l}"));
    }
    s
}

/// The interval-partitioned belief LP: singleton beliefs over supported labels,
/// region beliefs over stored tuples, normalization and marginalization rows.
pub fn build_int_part_lp(model: &RegionModel) -> Result<BeliefLp> {
    let mut lp = LinearProgram::new("int_part_lp_bp");
    let mut roles = Vec::new();
    let mut single_col: Vec<Vec<Option<usize>>> = model.labels.iter().map(|&l| alloc::vec![None; l]).collect();
    for (v, sup) in model.support.iter().enumerate() {
        let mut norm = Vec::new();
        for &a in sup {
            let c = lp.add_col(format!("b_i_v{v}_{a}"), 0.0, 1.0);
            roles.push(ColumnRole::Single { var: v, label: a });
            single_col[v][a as usize] = Some(c);
            norm.push((c, 1.0));
        }
        lp.add_row(format!("norm_i_v{v}"), RowKind::Eq, norm, 1.0);
    }
    for (r, t) in model.regions.iter().enumerate() {
        let tag = t.node.tag();
        let first = lp.cols.len();
        for i in 0..t.len() {
            lp.add_col(format!("b_f_{tag}_{}", label_list(t.tuple(i))), t.cost[i], 1.0);
            roles.push(ColumnRole::Region { region: r, tuple: i });
        }
        lp.add_row(format!("norm_f_{tag}"), RowKind::Eq, (first..lp.cols.len()).map(|c| (c, 1.0)).collect(), 1.0);
        for (pos, &v) in t.scope.iter().enumerate() {
            let mut rows: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); model.labels[v]];
            for i in 0..t.len() {
                rows[t.tuple(i)[pos] as usize].push((first + i, -1.0));
            }
            for &a in &model.support[v] {
                let mut coeffs = alloc::vec![(single_col[v][a as usize].expect("supported label"), 1.0)];
                coeffs.append(&mut rows[a as usize]);
                lp.add_row(format!("marg_{tag}_v{v}_{a}"), RowKind::Eq, coeffs, 0.0);
            }
        }
    }
    Ok(BeliefLp { lp, roles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef;
    use crate::lp::solve_lp;
    use crate::region::table;
    use alloc::vec;

    #[test]
    fn one_variable_two_cells() {
        let t = table(NodeRef::Factor(0), vec![0], vec![(vec![0], 0.0), (vec![1], 0.5)]);
        let m = RegionModel::from_tables(vec![2], vec![t]).unwrap();
        let b = build_int_part_lp(&m).unwrap();
        assert_eq!(b.lp.cols.len(), 4);
        let s = solve_lp(&b.lp).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(b.incumbent(&s.x, 1), vec![0]);
    }
}
