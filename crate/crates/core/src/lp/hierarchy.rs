//! Super-node hierarchies: joint beliefs over downward-closed families of variable
//! sets, marginalized along every immediate containment.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::belief::label_list;
use super::{BeliefLp, ColumnRole, LinearProgram, RowKind};
use crate::discretize::Label;
use crate::graph::VarId;
use crate::region::RegionModel;
use crate::{Error, Result};

pub const DEFAULT_SUPERNODE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// Power sets of every region scope, plus singletons.
    Minimal,
    /// Every set of at most `k` variables, plus region scopes and their subsets.
    Size(usize),
}

/// Sorted family of sorted variable sets, by size then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperNodeSet {
    pub sets: Vec<Vec<VarId>>,
}

impl SuperNodeSet {
    pub fn index(&self, s: &[VarId]) -> Option<usize> {
        self.sets.binary_search_by(|x| (x.len(), x.as_slice()).cmp(&(s.len(), s))).ok()
    }

    /// Downward closed and grounding every scope.
    pub fn is_admissible(&self, scopes: &[Vec<VarId>]) -> bool {
        scopes.iter().all(|s| self.index(s).is_some())
            && self.sets.iter().all(|s| s.len() == 1 || (0..s.len()).all(|k| self.index(&without(s, k)).is_some()))
    }
}

fn without(s: &[VarId], k: usize) -> Vec<VarId> {
    let mut t = s.to_vec();
    t.remove(k);
    t
}

fn subsets_into(s: &[VarId], out: &mut BTreeSet<Vec<VarId>>, cap: usize) -> Result<()> {
    if s.len() >= usize::BITS as usize - 1 || (1usize << s.len()) > cap.saturating_mul(2) {
        return Err(Error::ResourceCap(format!("super-node set exceeds {cap} members")));
    }
    for mask in 1usize..(1 << s.len()) {
        out.insert(s.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &v)| v).collect());
    }
    Ok(())
}

fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<VarId>, out: &mut BTreeSet<Vec<VarId>>, cap: usize) -> Result<()> {
    if cur.len() == k {
        out.insert(cur.clone());
        if out.len() > cap {
            return Err(Error::ResourceCap(format!("super-node set exceeds {cap} members")));
        }
        return Ok(());
    }
    for v in start..n {
        cur.push(v);
        combos(n, k, v + 1, cur, out, cap)?;
        cur.pop();
    }
    Ok(())
}

pub fn generate_supernodes(model: &RegionModel, level: Level, cap: usize) -> Result<SuperNodeSet> {
    let n = model.vars();
    let mut out = BTreeSet::new();
    for v in 0..n {
        out.insert(vec![v]);
    }
    for t in &model.regions {
        subsets_into(&t.scope, &mut out, cap)?;
    }
    if let Level::Size(k) = level {
        for size in 2..=k.min(n) {
            combos(n, size, 0, &mut Vec::new(), &mut out, cap)?;
        }
    }
    if out.len() > cap {
        return Err(Error::ResourceCap(format!("super-node set exceeds {cap} members")));
    }
    let mut sets: Vec<Vec<VarId>> = out.into_iter().collect();
    sets.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(SuperNodeSet { sets })
}

fn set_name(s: &[VarId]) -> String {
    label_list(&s.iter().map(|&v| v as Label).collect::<Vec<_>>())
}

/// Joint-belief LP over a super-node family. Region costs attach to the super-node
/// equal to their scope; tuples are kept only when every immediate projection and
/// every grounded region admits them. At most `cap` tuples per super-node.
pub fn build_hierarchy_lp(model: &RegionModel, sn: &SuperNodeSet, cap: usize) -> Result<BeliefLp> {
    let scopes: Vec<Vec<VarId>> = model.regions.iter().map(|t| t.scope.clone()).collect();
    if !sn.is_admissible(&scopes) {
        return Err(Error::InvalidArgument("super-node set is not downward closed or misses a region scope".into()));
    }
    let mut lp = LinearProgram::new("hierarchy_lp_bp");
    let mut roles = Vec::new();
    // per set: sorted tuples and the column of each
    let mut tuples: Vec<Vec<Vec<Label>>> = Vec::with_capacity(sn.sets.len());
    let mut first_col: Vec<usize> = Vec::with_capacity(sn.sets.len());
    for (si, s) in sn.sets.iter().enumerate() {
        let grounded: Vec<usize> = (0..model.regions.len()).filter(|&r| model.regions[r].scope == *s).collect();
        let mut rows: Vec<(Vec<Label>, f64)> = Vec::new();
        if s.len() == 1 {
            for &a in &model.support[s[0]] {
                rows.push((vec![a], 0.0));
            }
        } else {
            let base = sn.index(&s[..s.len() - 1]).expect("closed");
            let subs: Vec<(usize, usize)> = (0..s.len()).map(|k| (k, sn.index(&without(s, k)).expect("closed"))).collect();
            let last = *s.last().unwrap();
            for t in &tuples[base] {
                for &a in &model.support[last] {
                    let mut cand = t.clone();
                    cand.push(a);
                    let ok = subs.iter().all(|&(k, b)| tuples[b].binary_search(&without_label(&cand, k)).is_ok());
                    if ok {
                        rows.push((cand, 0.0));
                        if rows.len() > cap {
                            return Err(Error::ResourceCap(format!("super-node {{{}}} has more than {cap} tuples", set_name(s))));
                        }
                    }
                }
            }
        }
        let mut kept = Vec::with_capacity(rows.len());
        'tuple: for (t, mut c) in rows {
            for &r in &grounded {
                match model.regions[r].find(&t) {
                    Some(i) => c += model.regions[r].cost[i],
                    None => continue 'tuple,
                }
            }
            kept.push((t, c));
        }
        if kept.is_empty() {
            return Err(Error::DiscretizationInfeasible(format!("super-node {{{}}} has no consistent tuple", set_name(s))));
        }
        let name = set_name(s);
        first_col.push(lp.cols.len());
        let mut norm = Vec::with_capacity(kept.len());
        let mut ts = Vec::with_capacity(kept.len());
        for (t, c) in kept {
            let col = lp.add_col(format!("b_s_{name}_{}", label_list(&t)), c, 1.0);
            norm.push((col, 1.0));
            roles.push(if s.len() == 1 { ColumnRole::Single { var: s[0], label: t[0] } } else { ColumnRole::Super { set: si, tuple: t.clone() } });
            ts.push(t);
        }
        lp.add_row(format!("norm_s_{name}"), RowKind::Eq, norm, 1.0);
        tuples.push(ts);
    }
    for (si, s) in sn.sets.iter().enumerate() {
        if s.len() < 2 {
            continue;
        }
        let name = set_name(s);
        for k in 0..s.len() {
            let b = sn.index(&without(s, k)).unwrap();
            let mut acc: Vec<Vec<(usize, f64)>> = tuples[b].iter().enumerate().map(|(i, _)| vec![(first_col[b] + i, 1.0)]).collect();
            for (i, t) in tuples[si].iter().enumerate() {
                let j = tuples[b].binary_search(&without_label(t, k)).expect("projection kept");
                acc[j].push((first_col[si] + i, -1.0));
            }
            for (j, coeffs) in acc.into_iter().enumerate() {
                lp.add_row(format!("marg_s_{name}_v{}_{}", s[k], label_list(&tuples[b][j])), RowKind::Eq, coeffs, 0.0);
            }
        }
    }
    Ok(BeliefLp { lp, roles })
}

fn without_label(t: &[Label], k: usize) -> Vec<Label> {
    let mut u = t.to_vec();
    u.remove(k);
    u
}
