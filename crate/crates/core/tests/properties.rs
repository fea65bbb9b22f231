use pcnf_core::discretize::{partition_uniform, Label};
use pcnf_core::graph::NodeRef;
use pcnf_core::interval::round;
use pcnf_core::lp::{build_int_part_lp, solve_lp, LinearProgram, LpStatus, RowKind};
use pcnf_core::oracle::{discretized_optimum, lp_vertex_enumerate};
use pcnf_core::region::{table, RegionModel};
use pcnf_core::relation::{Relation, Verdict};
use pcnf_core::tree::solve_tree;
use pcnf_core::Interval;
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = Interval> {
    (-50.0f64..50.0, 0.0f64..20.0).prop_map(|(lo, w)| Interval::new(lo, lo + w))
}

fn inside(i: Interval, f: f64) -> f64 {
    i.lo + (i.hi - i.lo) * f
}

/// Random tree of pairwise tables over `n` variables with `l` labels each.
fn tree_model(n: usize, l: u32, edges: &[usize], costs: &[f64], drop: &[bool]) -> Option<RegionModel> {
    let mut regions = Vec::new();
    let mut ci = 0;
    let mut di = 0;
    for v in 1..n {
        let p = edges[v - 1] % v;
        let mut rows = Vec::new();
        for a in 0..l {
            for b in 0..l {
                di += 1;
                if drop[di % drop.len()] {
                    continue;
                }
                ci += 1;
                rows.push((vec![a, b], costs[ci % costs.len()]));
            }
        }
        regions.push(table(NodeRef::Factor(v), vec![p, v], rows));
    }
    RegionModel::from_tables(vec![l as usize; n], regions).ok()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn interval_arithmetic_encloses_points(a in interval(), b in interval(), f in 0.0f64..=1.0, g in 0.0f64..=1.0) {
        let (x, y) = (inside(a, f), inside(b, g));
        prop_assert!((a + b).contains(x + y));
        prop_assert!((a - b).contains(x - y));
        prop_assert!((a * b).contains(x * y));
        prop_assert!(a.sqr().contains(x * x));
        if let Some(q) = a.div(&b) {
            prop_assert!(b.contains(0.0) || q.contains(x / y));
        }
    }

    #[test]
    fn directed_rounding_brackets(x in -1e6f64..1e6, y in -1e6f64..1e6) {
        prop_assert!(round::add_down(x, y) <= x + y && x + y <= round::add_up(x, y));
        prop_assert!(round::mul_down(x, y) <= x * y && x * y <= round::mul_up(x, y));
        let s = x.abs();
        prop_assert!(round::sqrt_down(s) <= s.sqrt() && s.sqrt() <= round::sqrt_up(s));
    }

    #[test]
    fn uniform_partition_covers_the_domain(d in interval(), t in 1usize..40) {
        let cuts = partition_uniform(d, t).unwrap();
        prop_assert_eq!(cuts[0], d.lo);
        prop_assert_eq!(*cuts.last().unwrap(), d.hi);
        prop_assert!(cuts.windows(2).all(|w| w[0] <= w[1]));
        if d.width() > 0.0 {
            prop_assert_eq!(cuts.len(), t + 1);
        }
    }

    #[test]
    fn linear_projection_keeps_solutions(c in prop::collection::vec(0.25f64..3.0, 2..4), x in prop::collection::vec(-5.0f64..5.0, 2..4), pad in 0.0f64..2.0) {
        let k = c.len().min(x.len());
        let (c, x) = (&c[..k], &x[..k]);
        let rhs: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        let rel = Relation::Linear { coeffs: c.to_vec(), rhs };
        let b: Vec<Interval> = x.iter().map(|&v| Interval::new(v - pad, v + pad + 0.5)).collect();
        prop_assert_ne!(rel.test(&b), Verdict::Infeasible);
        for p in 0..k {
            let pr = rel.project(&b, p).unwrap();
            prop_assert!(pr.distance(x[p]) <= 1e-9 * (1.0 + x[p].abs()));
        }
    }

    #[test]
    fn tree_dp_matches_search(n in 2usize..6, l in 2u32..4, edges in prop::collection::vec(0usize..100, 5), costs in prop::collection::vec(-3.0f64..3.0, 7), drop in prop::collection::vec(prop::bool::weighted(0.3), 5)) {
        if let Some(m) = tree_model(n, l, &edges, &costs, &drop) {
            let dp = solve_tree(&m, 0).unwrap();
            let (best, _, _) = discretized_optimum(&m, 1_000_000).unwrap();
            prop_assert!((dp.value - best).abs() <= 1e-9 * (1.0 + best.abs()));
            prop_assert!((m.evaluate(&dp.assignment).unwrap() - dp.value).abs() <= 1e-12 * (1.0 + best.abs()));
            let lp = solve_lp(&build_int_part_lp(&m).unwrap().lp).unwrap();
            prop_assert!((lp.objective - best).abs() <= 1e-7 * (1.0 + best.abs()));
        }
    }

    #[test]
    fn loopy_lp_is_a_lower_bound(costs in prop::collection::vec(-2.0f64..2.0, 12), drop in prop::collection::vec(prop::bool::weighted(0.25), 12)) {
        let mut regions = Vec::new();
        let mut k = 0;
        for (f, (a, b)) in [(0usize, 1usize), (1, 2), (0, 2)].into_iter().enumerate() {
            let mut rows: Vec<(Vec<Label>, f64)> = Vec::new();
            for x in 0..2 {
                for y in 0..2 {
                    if !drop[k] || (x == 0 && y == 0) {
                        rows.push((vec![x, y], costs[k]));
                    }
                    k += 1;
                }
            }
            regions.push(table(NodeRef::Factor(f), vec![a, b], rows));
        }
        let m = RegionModel::from_tables(vec![2; 3], regions).unwrap();
        let lp = solve_lp(&build_int_part_lp(&m).unwrap().lp).unwrap();
        let (best, _, _) = discretized_optimum(&m, 1_000_000).unwrap();
        prop_assert_eq!(lp.status, LpStatus::Optimal);
        prop_assert!(lp.objective <= best + 1e-9 * (1.0 + best.abs()));
    }

    #[test]
    fn simplex_matches_vertex_enumeration(c in prop::collection::vec(-3i32..4, 3), a in prop::collection::vec(-2i32..3, 6), b in prop::collection::vec(0i32..6, 2), kinds in prop::collection::vec(0u8..3, 2)) {
        let mut lp = LinearProgram::new("p");
        for (j, &cj) in c.iter().enumerate() {
            lp.add_col(format!("x{j}"), cj as f64, 4.0);
        }
        for i in 0..2 {
            let kind = [RowKind::Eq, RowKind::Le, RowKind::Ge][kinds[i] as usize];
            let coeffs: Vec<(usize, f64)> = (0..3).map(|j| (j, a[3 * i + j] as f64)).filter(|x| x.1 != 0.0).collect();
            lp.add_row(format!("r{i}"), kind, coeffs, b[i] as f64);
        }
        let s = solve_lp(&lp).unwrap();
        let v = lp_vertex_enumerate(&lp).unwrap();
        match v {
            None => prop_assert_eq!(s.status, LpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(s.status, LpStatus::Optimal);
                prop_assert!((s.objective - v).abs() <= 1e-9 * (1.0 + v.abs()), "{} vs {}", s.objective, v);
                prop_assert!(lp.max_violation(&s.x) <= 1e-9);
            }
        }
    }
}
