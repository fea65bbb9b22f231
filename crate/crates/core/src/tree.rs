//! Exact min-sum dynamic programming on acyclic region models: one upward sweep
//! of messages and one downward sweep of argmins.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::discretize::Label;
use crate::graph::VarId;
use crate::region::RegionModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeNode {
    Var(VarId),
    Region(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootedTree {
    /// One root per connected component; the requested root first.
    pub roots: Vec<VarId>,
    /// Parents before children.
    pub order: Vec<TreeNode>,
    pub var_parent: Vec<Option<usize>>,
    pub region_parent: Vec<VarId>,
    pub var_children: Vec<Vec<usize>>,
    /// `(variable, position in the region scope)`, sorted by variable.
    pub region_children: Vec<Vec<(VarId, usize)>>,
}

impl RootedTree {
    pub fn leaves(&self) -> Vec<TreeNode> {
        self.order
            .iter()
            .copied()
            .filter(|n| match *n {
                TreeNode::Var(v) => self.var_children[v].is_empty(),
                TreeNode::Region(r) => self.region_children[r].is_empty(),
            })
            .collect()
    }
}

/// Roots the variable/region graph at `root`; further components are rooted at
/// their smallest variable. Fails with `NotATree` on a cycle.
pub fn root_tree(model: &RegionModel, root: VarId) -> Result<RootedTree> {
    let n = model.vars();
    if root >= n {
        return Err(Error::InvalidArgument(format!("root {root} is not a variable")));
    }
    let by_var = model.by_var();
    let nr = model.regions.len();
    let mut t = RootedTree {
        roots: Vec::new(),
        order: Vec::with_capacity(n + nr),
        var_parent: vec![None; n],
        region_parent: vec![usize::MAX; nr],
        var_children: vec![Vec::new(); n],
        region_children: vec![Vec::new(); nr],
    };
    let mut seen_v = vec![false; n];
    let mut seen_r = vec![false; nr];
    let starts = core::iter::once(root).chain(0..n);
    for s in starts {
        if seen_v[s] {
            continue;
        }
        t.roots.push(s);
        seen_v[s] = true;
        let mut queue = VecDeque::from([TreeNode::Var(s)]);
        while let Some(node) = queue.pop_front() {
            t.order.push(node);
            match node {
                TreeNode::Var(v) => {
                    for &r in &by_var[v] {
                        if t.var_parent[v] == Some(r) {
                            continue;
                        }
                        if seen_r[r] {
                            return Err(Error::NotATree);
                        }
                        seen_r[r] = true;
                        t.region_parent[r] = v;
                        t.var_children[v].push(r);
                        queue.push_back(TreeNode::Region(r));
                    }
                }
                TreeNode::Region(r) => {
                    for (pos, &v) in model.regions[r].scope.iter().enumerate() {
                        if v == t.region_parent[r] {
                            continue;
                        }
                        if seen_v[v] {
                            return Err(Error::NotATree);
                        }
                        seen_v[v] = true;
                        t.var_parent[v] = Some(r);
                        t.region_children[r].push((v, pos));
                        queue.push_back(TreeNode::Var(v));
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Upward messages: `kappa[v]` from a variable to its parent region and
/// `gamma[r]` from a region to its parent variable, indexed by label.
#[derive(Clone, Debug, PartialEq)]
pub struct Messages {
    pub kappa: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
}

pub fn forward_pass(model: &RegionModel, tree: &RootedTree) -> Messages {
    let mut kappa: Vec<Vec<f64>> = vec![Vec::new(); model.vars()];
    let mut gamma: Vec<Vec<f64>> = vec![Vec::new(); model.regions.len()];
    for &node in tree.order.iter().rev() {
        match node {
            TreeNode::Var(v) => {
                let mut k = vec![0.0; model.labels[v]];
                for &r in &tree.var_children[v] {
                    for (a, g) in k.iter_mut().zip(&gamma[r]) {
                        *a += *g;
                    }
                }
                kappa[v] = k;
            }
            TreeNode::Region(r) => {
                let t = &model.regions[r];
                let p = tree.region_parent[r];
                let pp = t.scope.iter().position(|&x| x == p).unwrap();
                let mut g = vec![f64::INFINITY; model.labels[p]];
                for i in 0..t.len() {
                    let tu = t.tuple(i);
                    let mut val = t.cost[i];
                    for &(v, pos) in &tree.region_children[r] {
                        val += kappa[v][tu[pos] as usize];
                    }
                    let slot = &mut g[tu[pp] as usize];
                    if val < *slot {
                        *slot = val;
                    }
                }
                gamma[r] = g;
            }
        }
    }
    Messages { kappa, gamma }
}

fn argmin(v: &[f64]) -> (Label, f64) {
    let mut best = (0, f64::INFINITY);
    for (a, &x) in v.iter().enumerate() {
        if x < best.1 {
            best = (a as Label, x);
        }
    }
    best
}

/// Assigns every variable: roots by the argmin of their incoming messages, the rest
/// from the first minimising tuple of their parent region.
pub fn backward_pass(model: &RegionModel, tree: &RootedTree, msg: &Messages) -> Result<(f64, Vec<Label>)> {
    let mut a: Vec<Label> = vec![0; model.vars()];
    let mut value = 0.0;
    for &r in &tree.roots {
        let (l, v) = argmin(&msg.kappa[r]);
        if !v.is_finite() {
            return Err(Error::DiscretizationInfeasible("tree root has no finite label".into()));
        }
        a[r] = l;
        value += v;
    }
    for &node in &tree.order {
        let TreeNode::Region(r) = node else { continue };
        let t = &model.regions[r];
        let p = tree.region_parent[r];
        let pp = t.scope.iter().position(|&x| x == p).unwrap();
        let mut best = (usize::MAX, f64::INFINITY);
        for i in 0..t.len() {
            let tu = t.tuple(i);
            if tu[pp] != a[p] {
                continue;
            }
            let mut val = t.cost[i];
            for &(v, pos) in &tree.region_children[r] {
                val += msg.kappa[v][tu[pos] as usize];
            }
            if val < best.1 {
                best = (i, val);
            }
        }
        if best.0 == usize::MAX {
            return Err(Error::Internal(format!("region {r} has no tuple for its parent label")));
        }
        let tu = t.tuple(best.0);
        for &(v, pos) in &tree.region_children[r] {
            a[v] = tu[pos];
        }
    }
    Ok((value, a))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeSolution {
    pub value: f64,
    pub assignment: Vec<Label>,
}

pub fn solve_tree(model: &RegionModel, root: VarId) -> Result<TreeSolution> {
    let tree = root_tree(model, root)?;
    let msg = forward_pass(model, &tree);
    let (value, assignment) = backward_pass(model, &tree, &msg)?;
    let again = model.evaluate(&assignment).ok_or_else(|| Error::Internal("tree assignment violates a region".into()))?;
    if (again - value).abs() > 1e-12 * (1.0 + value.abs()) {
        return Err(Error::Internal(format!("tree value {value} does not match its assignment ({again})")));
    }
    Ok(TreeSolution { value, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef;
    use crate::region::table;

    #[test]
    fn leaf_factor_message_is_its_table() {
        let t = table(NodeRef::Factor(0), vec![0], vec![(vec![0], 0.0), (vec![1], 0.5)]);
        let m = RegionModel::from_tables(vec![2], vec![t]).unwrap();
        let tree = root_tree(&m, 0).unwrap();
        let msg = forward_pass(&m, &tree);
        assert_eq!(msg.gamma[0], vec![0.0, 0.5]);
        let s = solve_tree(&m, 0).unwrap();
        assert_eq!((s.value, s.assignment), (0.0, vec![0]));
    }

    #[test]
    fn messages_add_at_variables() {
        let g1 = table(NodeRef::Factor(0), vec![0], vec![(vec![0], 0.0), (vec![1], 1.0)]);
        let g2 = table(NodeRef::Factor(1), vec![0], vec![(vec![0], 2.0), (vec![1], 0.0)]);
        let m = RegionModel::from_tables(vec![2], vec![g1, g2]).unwrap();
        let tree = root_tree(&m, 0).unwrap();
        assert_eq!(forward_pass(&m, &tree).kappa[0], vec![2.0, 1.0]);
    }

    #[test]
    fn tie_takes_lowest_label() {
        let t = table(NodeRef::Factor(0), vec![0], vec![(vec![0], 1.0), (vec![1], 1.0)]);
        let m = RegionModel::from_tables(vec![2], vec![t]).unwrap();
        assert_eq!(solve_tree(&m, 0).unwrap().assignment, vec![0]);
    }

    #[test]
    fn path_order_and_loops() {
        // v0 - r0 - v1 - r1 - v2
        let p = |a: usize, b: usize, k: usize| table(NodeRef::Constraint(k), vec![a, b], vec![(vec![0, 0], 0.0), (vec![1, 1], 1.0)]);
        let m = RegionModel::from_tables(vec![2, 2, 2], vec![p(0, 1, 0), p(1, 2, 1)]).unwrap();
        let tree = root_tree(&m, 0).unwrap();
        assert_eq!(
            tree.order,
            vec![TreeNode::Var(0), TreeNode::Region(0), TreeNode::Var(1), TreeNode::Region(1), TreeNode::Var(2)]
        );
        let lp = RegionModel::from_tables(vec![2, 2, 2], vec![p(0, 1, 0), p(1, 2, 1), p(0, 2, 2)]).unwrap();
        assert_eq!(root_tree(&lp, 0), Err(Error::NotATree));
        for root in 0..3 {
            assert_eq!(solve_tree(&m, root).unwrap().value, 0.0);
        }
    }
}
