//! Acceptance gate: one PASS/FAIL line per criterion, each with its time limit.
//! Runs without the test harness so the lines are always printed.

use std::time::{Duration, Instant};

use pcnf::engine::{self, LpEngine};
use pcnf::generate::{chain, random_network, two_node_gas, Family};
use pcnf::lpio;
use pcnf::pipeline::{self, RunConfig};
use pcnf_core::discretize::{Label, Partition};
use pcnf_core::graph::{build_gm, Block, ConstraintKind, FactorGraph, NodeRef, ObjectiveMode};
use pcnf_core::lp::{build_hierarchy_lp, build_int_part_lp, generate_supernodes, solve_lp, Level, LpStatus};
use pcnf_core::network::Network;
use pcnf_core::oracle::{continuous_samples, discretized_optimum, grid_continuous, lp_vertex_enumerate, ContinuousOptions, DEFAULT_CAP};
use pcnf_core::physics::{Direction, FlowLaw, PhysicsKind};
use pcnf_core::region::{table, RegionModel, DEFAULT_TUPLE_CAP};
use pcnf_core::relation::Relation;
use pcnf_core::tighten::{tighten_all, tighten_once, BoundsState, Schedule, TightenOptions};
use pcnf_core::tree::solve_tree;
use pcnf_core::Interval;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn family(i: usize) -> Family {
    if i % 2 == 0 {
        Family::Gas
    } else {
        Family::Dissipative
    }
}

fn model_of(net: &Network, t: usize) -> (FactorGraph, Partition, RegionModel) {
    let gm = build_gm(net, ObjectiveMode::MinCost).unwrap();
    let part = Partition::uniform(&gm, t).unwrap();
    let model = RegionModel::build(&gm, &part, DEFAULT_TUPLE_CAP).unwrap();
    (gm, part, model)
}

fn lp_value(model: &RegionModel) -> f64 {
    let blp = build_int_part_lp(model).unwrap();
    let s = engine::solve(&blp.lp, LpEngine::Auto).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    s.objective
}

fn ordering() -> Check {
    let (mut n_inst, mut loopy_n, mut skipped) = (0, 0, 0);
    for i in 0..32 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let loopy = (i / 2) % 2 == 1;
        let n = 3 + (i / 4) % 4;
        let t = if i < 16 { 4 } else { 8 };
        let net = random_network(&mut rng, family(i), n, loopy);
        let (gm, part, model) = model_of(&net, t);
        let lp = lp_value(&model);
        let (disc, _, _) = discretized_optimum(&model, DEFAULT_CAP).map_err(|e| format!("instance {i}: {e}"))?;
        let opts = ContinuousOptions { cap: 256, seed: i as u64, sample: true, ..ContinuousOptions::default() };
        let cont = grid_continuous(&gm, &part, &opts).map_err(|e| format!("instance {i}: {e}"))?;
        if lp > disc + 1e-7 * (1.0 + disc.abs()) {
            return Err(format!("instance {i}: LP {lp} above discretized optimum {disc}"));
        }
        if cont.feasible {
            if disc > cont.value + 1e-7 * (1.0 + cont.value.abs()) + cont.residual {
                return Err(format!("instance {i}: discretized optimum {disc} above continuous value {}", cont.value));
            }
        } else {
            skipped += 1;
        }
        n_inst += 1;
        loopy_n += loopy as usize;
    }
    if skipped > 0 {
        return Err(format!("{skipped} instances without a feasible continuous point"));
    }
    Ok(format!("{n_inst} instances ({loopy_n} with a cycle), LP <= discretized <= continuous"))
}

fn tree_exactness() -> Check {
    let mut worst = 0.0f64;
    for i in 0..24 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i as u64);
        let net = random_network(&mut rng, family(i), 3 + i % 4, false);
        let (gm, _, model) = model_of(&net, if i < 12 { 4 } else { 6 });
        if !gm.is_tree() {
            return Err(format!("instance {i}: factor graph is not a tree"));
        }
        let dp = solve_tree(&model, 0).map_err(|e| e.to_string())?.value;
        let blp = build_int_part_lp(&model).unwrap();
        let lp = solve_lp(&blp.lp).map_err(|e| e.to_string())?.objective;
        if !close(dp, lp, 1e-7) {
            return Err(format!("instance {i}: tree DP {dp} vs LP {lp}"));
        }
        worst = worst.max((dp - lp).abs());
    }
    Ok(format!("24 trees, largest |DP - LP| = {worst:.2e}"))
}

fn two_node_recovery() -> Check {
    let cfg = RunConfig { t: 32, refine_rounds: 3, tighten_sweeps: 5, oracle: true, ..RunConfig::default() };
    let rep = pipeline::solve(&two_node_gas(), ObjectiveMode::MinCost, &cfg).map_err(|e| e.to_string())?;
    let pi = rep
        .assignment
        .iter()
        .flat_map(|v| &v.cells)
        .find(|c| c.coordinate == "pi1_0")
        .ok_or("no pi1_0 coordinate")?;
    if !(pi.lo <= 21.0 && 21.0 <= pi.hi) {
        return Err(format!("recovered cell [{}, {}] misses 21", pi.lo, pi.hi));
    }
    let last = rep.rounds.last().unwrap();
    let gap = last.gap.ok_or("oracle found no feasible point")?;
    if gap >= 0.02 {
        return Err(format!("gap {gap}"));
    }
    Ok(format!("pi1 cell [{}, {}], bound {:.6}, gap {gap:.1e}, {} round(s)", pi.lo, pi.hi, rep.lower_bound, rep.rounds.len()))
}

fn monotone_refinement() -> Check {
    let (mut rounds, mut rises) = (0, 0);
    for i in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + i as u64);
        let net = random_network(&mut rng, family(i), 3 + i % 3, false);
        let cfg = RunConfig { t: 4, refine_rounds: 4, ..RunConfig::default() };
        let rep = pipeline::solve(&net, ObjectiveMode::MinCost, &cfg).map_err(|e| format!("instance {i}: {e}"))?;
        let lbs: Vec<f64> = rep.rounds.iter().map(|r| r.lower_bound).collect();
        if lbs.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("instance {i}: bounds {lbs:?}"));
        }
        rounds += lbs.len();
        rises += lbs.windows(2).filter(|w| w[1] > w[0]).count();
    }
    Ok(format!("10 instances, {rounds} rounds, no decrease, {rises} strict rises"))
}

/// Random loopy model: unary costs, a cycle of pairwise tables and one ternary
/// table, a planted assignment kept feasible. A frustrated model is a symmetric
/// odd cycle whose pairs prefer to disagree.
fn loopy_model(rng: &mut ChaCha8Rng, frustrated: bool) -> RegionModel {
    let n = if frustrated { 5 } else { rng.gen_range(4..=6) };
    let l: u32 = if n == 4 { 3 } else { 2 };
    let (keep_p, noise) = if frustrated { (1.0, 0.1) } else { (0.75, 1.0) };
    let planted: Vec<Label> = (0..n).map(|_| rng.gen_range(0..l)).collect();
    let mut regions = Vec::new();
    let mut k = 0;
    let mut add = |scope: Vec<usize>, rng: &mut ChaCha8Rng| {
        let mut rows = Vec::new();
        let w = scope.len() as u32;
        for code in 0..l.pow(w) {
            let tu: Vec<Label> = (0..w).map(|p| code / l.pow(p) % l).collect();
            let keep = tu.iter().zip(&scope).all(|(&a, &v)| a == planted[v]) || rng.gen_bool(keep_p);
            if keep {
                let bias = if w == 2 && tu[0] == tu[1] { 1.0 } else { 0.0 };
                rows.push((tu, bias + rng.gen_range(-noise..noise)));
            }
        }
        regions.push(table(NodeRef::Factor(k), scope, rows));
        k += 1;
    };
    for v in 0..n {
        add(vec![v], rng);
    }
    for v in 0..n {
        let (a, b) = (v, (v + 1) % n);
        add(vec![a.min(b), a.max(b)], rng);
    }
    add(vec![0, 2, 3], rng);
    RegionModel::from_tables(vec![l as usize; n], regions).unwrap()
}

fn lp_with(model: &RegionModel, level: Option<Level>) -> Result<f64, String> {
    let blp = match level {
        None => build_int_part_lp(model),
        Some(l) => generate_supernodes(model, l, 4096).and_then(|sn| build_hierarchy_lp(model, &sn, DEFAULT_TUPLE_CAP)),
    }
    .map_err(|e| e.to_string())?;
    let s = engine::solve(&blp.lp, LpEngine::Auto).map_err(|e| e.to_string())?;
    Ok(s.objective)
}

fn hierarchy_ordering() -> Check {
    let mut strict = 0;
    for i in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + i as u64);
        let model = loopy_model(&mut rng, i % 2 == 0);
        let n = model.vars();
        let plain = lp_with(&model, None)?;
        let minimal = lp_with(&model, Some(Level::Minimal))?;
        let full = lp_with(&model, Some(Level::Size(n)))?;
        let (exact, _, _) = discretized_optimum(&model, DEFAULT_CAP).map_err(|e| e.to_string())?;
        let tol = |v: f64| 1e-7 * (1.0 + v.abs());
        if plain > minimal + tol(minimal) || minimal > full + tol(full) || (full - exact).abs() > tol(exact) {
            return Err(format!("instance {i}: plain {plain}, minimal {minimal}, full {full}, exact {exact}"));
        }
        strict += (plain < exact - tol(exact)) as usize;
    }
    Ok(format!("10 loopy models, plain <= minimal <= full = exact, {strict} with a plain gap"))
}

fn tightening_soundness() -> Check {
    let mut samples = 0;
    let mut sweeps = 0;
    for i in 0..15 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + i as u64);
        let net = random_network(&mut rng, family(i), 3 + i % 3, i % 3 == 2);
        let gm = build_gm(&net, ObjectiveMode::MinCost).unwrap();
        let schedule = if i % 2 == 0 { Schedule::Jacobi } else { Schedule::GaussSeidel };
        let opts = TightenOptions { max_sweeps: 1, schedule, ..TightenOptions::default() };
        let mut st = BoundsState::new(&gm);
        for _ in 0..20 {
            let prev = st.bounds.clone();
            st = tighten_all(&gm, st, &opts).map_err(|e| format!("instance {i}: {e}"))?;
            if prev.iter().zip(&st.bounds).any(|(o, n)| !o.contains_interval(n)) {
                return Err(format!("instance {i}: sweep {} widened a bound", st.sweeps));
            }
            if *st.changes.last().unwrap() < opts.tol {
                break;
            }
        }
        sweeps += st.sweeps;
        let part = Partition::uniform(&gm, 4).unwrap();
        let copts = ContinuousOptions { cap: 200, seed: i as u64, sample: true, ..ContinuousOptions::default() };
        for s in continuous_samples(&gm, &part, &copts).map_err(|e| e.to_string())? {
            samples += 1;
            for (c, (&x, b)) in s.point.iter().zip(&st.bounds).enumerate() {
                if b.distance(x) > 1e-9 * (1.0 + x.abs()) {
                    return Err(format!("instance {i}: feasible {} = {x} outside [{}, {}]", gm.coords[c].name, b.lo, b.hi));
                }
            }
        }
    }
    if samples == 0 {
        return Err("no feasible samples".into());
    }
    let mut gm = FactorGraph::new();
    let a = gm.add_variable("a", &[("pi_i", Interval::new(0.0, 10.0)), ("phi_ij", Interval::new(1.0, 2.0))]);
    let b = gm.add_variable("b", &[("pi_j", Interval::new(0.0, 1.0)), ("phi_ji", Interval::new(-10.0, 10.0))]);
    let c = |v: usize, k: usize| gm.vars[v].coords[k];
    let coords = vec![c(a, 0), c(b, 0), c(a, 1), c(b, 1)];
    let edge = Relation::Edge { physics: PhysicsKind::Gas { gamma: 1.0, offset: 0.0 } };
    gm.add_constraint(ConstraintKind::Generic, vec![Block { relation: edge, coords }], vec![], &[]).unwrap();
    let got = tighten_once(&gm, &gm.domains(), 0, 16).map_err(|e| e.to_string())?;
    if got != Interval::new(1.0, 5.0) {
        return Err(format!("gas inversion gave {got}, expected [1, 5]"));
    }
    Ok(format!("15 instances, {sweeps} nested sweeps, {samples} feasible samples inside, gas inversion [1, 5] exact"))
}

fn linear_scaling() -> Check {
    let sizes = [50usize, 100, 200, 400];
    let mut pts = Vec::new();
    for &n in &sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + n as u64);
        let net = chain(&mut rng, Family::Gas, n);
        let (_, _, model) = model_of(&net, 8);
        let mut per = Vec::new();
        for _ in 0..5 {
            let (mut reps, start) = (0u32, Instant::now());
            while start.elapsed() < Duration::from_millis(40) {
                solve_tree(&model, 0).map_err(|e| e.to_string())?;
                reps += 1;
            }
            per.push(start.elapsed().as_secs_f64() / reps as f64);
        }
        per.sort_by(f64::total_cmp);
        pts.push(((n as f64).ln(), per[2].ln()));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if !(0.8..=1.3).contains(&slope) {
        return Err(format!("fitted exponent {slope:.3}"));
    }
    Ok(format!("chains of 50..400 nodes, fitted exponent {slope:.3}"))
}

fn tiny_model(rng: &mut ChaCha8Rng) -> RegionModel {
    loop {
        let two = rng.gen_bool(0.7);
        let labels: Vec<usize> = if two { vec![2, 2] } else { vec![rng.gen_range(2..=4)] };
        let mut regions = vec![];
        if two {
            let mut rows: Vec<(Vec<Label>, f64)> = Vec::new();
            for c in 0..4 {
                if rng.gen_bool(0.6) {
                    rows.push((vec![c / 2, c % 2], rng.gen_range(-2.0..2.0)));
                }
            }
            if rows.is_empty() {
                continue;
            }
            regions.push(table(NodeRef::Factor(0), vec![0, 1], rows));
        } else {
            let rows: Vec<(Vec<Label>, f64)> = (0..labels[0] as u32).map(|a| (vec![a], rng.gen_range(-2.0..2.0))).collect();
            regions.push(table(NodeRef::Factor(0), vec![0], rows));
        }
        if let Ok(m) = RegionModel::from_tables(labels, regions) {
            return m;
        }
    }
}

fn lp_io() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let model = tiny_model(&mut rng);
        let lp = build_int_part_lp(&model).unwrap().lp;
        if lp.cols.len() > 8 {
            return Err(format!("LP {i} has {} columns", lp.cols.len()));
        }
        let s = solve_lp(&lp).map_err(|e| e.to_string())?;
        let v = lp_vertex_enumerate(&lp).map_err(|e| e.to_string())?.ok_or(format!("LP {i}: enumeration found no vertex"))?;
        if (s.objective - v).abs() > 1e-9 {
            return Err(format!("LP {i}: simplex {} vs vertices {v}", s.objective));
        }
        worst = worst.max((s.objective - v).abs());
    }
    let cfg = RunConfig { t: 2, ..RunConfig::default() };
    let lp = pipeline::export_lp(&two_node_gas(), ObjectiveMode::MinCost, &cfg).map_err(|e| e.to_string())?;
    let text = lpio::write(&lp, lpio::Format::Mps).map_err(|e| e.to_string())?;
    if text != lpio::write(&lp, lpio::Format::Mps).unwrap() {
        return Err("two exports differ".into());
    }
    if text != include_str!("golden/two_node_gas_t2.mps") {
        return Err("export differs from the golden file".into());
    }
    Ok(format!("50 LPs agree with vertex enumeration (max diff {worst:.1e}), golden MPS byte-identical"))
}

fn physics_sampling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let scalar = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => PhysicsKind::Gas { gamma: rng.gen_range(0.1..3.0), offset: 0.0 },
        1 => PhysicsKind::Dissipative { law: FlowLaw::Power { coef: rng.gen_range(0.1..2.0), exponent: [1.0, 1.5, 2.0, 0.5][rng.gen_range(0..4)] } },
        _ => PhysicsKind::Dissipative { law: FlowLaw::Table { x: vec![-10.0, -1.0, 0.0, 2.0, 10.0], y: vec![-5.0, -1.0, 0.0, 0.5, 7.0] } },
    };
    for _ in 0..2000 {
        let p = scalar(&mut rng);
        let (a, b, c) = (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let f = |x: f64, y: f64| p.flow(&[x], &[y], Direction::Forward).unwrap()[0];
        let odd = !matches!(p, PhysicsKind::Dissipative { law: FlowLaw::Table { .. } });
        if (odd && f(a, b) != -f(b, a)) || f(a, b) != -p.flow(&[a], &[b], Direction::Reverse).unwrap()[0] {
            return Err(format!("{} not antisymmetric at ({a}, {b})", p.name()));
        }
        if a <= c && f(a, b) > f(c, b) {
            return Err(format!("{} not monotone at {a} <= {c}", p.name()));
        }
    }
    for _ in 0..500 {
        let x = rng.gen_range(0.05..1.0);
        let p = PhysicsKind::AcPowerVoltage { r: 0.0, x };
        let vi = [rng.gen_range(0.9..1.1), rng.gen_range(-0.2..0.2)];
        let vj = [rng.gen_range(0.9..1.1), rng.gen_range(-0.2..0.2)];
        let fw = p.flow(&vi, &vj, Direction::Forward).unwrap();
        let bw = p.flow(&vi, &vj, Direction::Reverse).unwrap();
        if (fw[0] + bw[0]).abs() > 1e-9 * (1.0 + fw[0].abs()) {
            return Err(format!("lossless line: P_ij {} and P_ji {} do not cancel", fw[0], bw[0]));
        }
    }
    let mut misses = 0;
    for k in 0..1000 {
        let p = match k % 4 {
            0 | 1 => scalar(&mut rng),
            2 => PhysicsKind::AcPowerVoltage { r: rng.gen_range(0.0..0.5), x: rng.gen_range(0.05..1.0) },
            _ => PhysicsKind::AcCurrentVoltage { r: rng.gen_range(0.0..0.5), x: rng.gen_range(0.05..1.0) },
        };
        let kk = p.components();
        let rand_box = |rng: &mut ChaCha8Rng| -> Vec<Interval> {
            (0..kk)
                .map(|_| {
                    let lo = rng.gen_range(-10.0..10.0);
                    Interval::new(lo, lo + rng.gen_range(0.0..3.0))
                })
                .collect()
        };
        let (bi, bj) = (rand_box(&mut rng), rand_box(&mut rng));
        for dir in [Direction::Forward, Direction::Reverse] {
            let enc = p.flow_enclosure(&bi, &bj, dir).unwrap();
            for s in 0..16 {
                let pick = |b: &Vec<Interval>, rng: &mut ChaCha8Rng| -> Vec<f64> {
                    b.iter().map(|x| if s < 4 { if (s + x.lo as usize) % 2 == 0 { x.lo } else { x.hi } } else { rng.gen_range(x.lo..=x.hi) }).collect()
                };
                let (xi, xj) = (pick(&bi, &mut rng), pick(&bj, &mut rng));
                let v = p.flow(&xi, &xj, dir).unwrap();
                misses += v.iter().zip(&enc).filter(|(v, e)| !e.contains(**v)).count();
            }
        }
    }
    if misses > 0 {
        return Err(format!("{misses} sampled flows outside their enclosure"));
    }
    Ok("antisymmetry, monotonicity, lossless reciprocity, 1000 enclosure boxes sound".into())
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Check); 9] = [
        (1, "relaxation ordering", 60, ordering),
        (2, "tree DP matches the LP", 30, tree_exactness),
        (3, "two-node gas recovery", 5, two_node_recovery),
        (4, "monotone refinement", 30, monotone_refinement),
        (5, "hierarchy ordering", 60, hierarchy_ordering),
        (6, "tightening soundness", 20, tightening_soundness),
        (7, "linear tree DP", 60, linear_scaling),
        (8, "LP correctness and export", 20, lp_io),
        (9, "physics laws", 10, physics_sampling),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        let res = match res {
            Ok(d) if secs > limit as f64 => Err(format!("{d}; over the time limit")),
            r => r,
        };
        match &res {
            Ok(d) => println!("criterion {id} {name}: PASS ({d}; {secs:.2}s of {limit}s)"),
            Err(d) => {
                println!("criterion {id} {name}: FAIL ({d}; {secs:.2}s of {limit}s)");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
