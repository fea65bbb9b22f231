//! Hard relations over scalar coordinates: point residuals, interval feasibility
//! tests and outer projections (contractors).
//!
//! Projections of monotone edge laws are settled against the floating-point point
//! evaluation, so a bound such as `pi_i >= 1` is returned exactly when the boundary
//! point evaluates onto the flow box.

use alloc::vec::Vec;

use crate::interval::{round, Interval};
use crate::network::TransformKind;
use crate::physics::{table_range, Direction, Law, PhysicsKind};

/// Outcome of an interval feasibility test over a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    /// The box provably misses the relation.
    Infeasible,
    /// The test could not refute a common point.
    Possible,
    /// The box provably contains a point of the relation.
    Certain,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Relation {
    /// All coordinates equal.
    Equal,
    /// `sum coeffs[k] * x[k] = rhs`
    Linear { coeffs: Vec<f64>, rhs: f64 },
    /// Edge physics over `[pi_ij(K), pi_ji(K), phi_ij(K), phi_ji(K)]`, where `pi_ij`
    /// is the copy at the edge's `from` node.
    Edge { physics: PhysicsKind },
    /// Port relation over `[pi_in(K), pi_out(K)]`, plus the ratio for a variable ratio.
    Transform { kind: TransformKind, components: usize },
    /// `lower <= |sum x| <= upper`
    AbsSumBand { lower: f64, upper: f64 },
}

impl Relation {
    pub fn name(&self) -> &'static str {
        match self {
            Relation::Equal => "equal",
            Relation::Linear { .. } => "linear",
            Relation::Edge { .. } => "edge",
            Relation::Transform { .. } => "transform",
            Relation::AbsSumBand { .. } => "abs-sum-band",
        }
    }

    /// Expected number of coordinates, when fixed by the relation.
    pub fn arity(&self) -> Option<usize> {
        match self {
            Relation::Equal | Relation::AbsSumBand { .. } => None,
            Relation::Linear { coeffs, .. } => Some(coeffs.len()),
            Relation::Edge { physics } => Some(4 * physics.components()),
            Relation::Transform { kind, components } => Some(match kind {
                TransformKind::VariableRatio { .. } => 3,
                _ => 2 * components,
            }),
        }
    }

    /// Largest violation at a point (0 when satisfied exactly).
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            Relation::Equal => {
                let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if x.is_empty() {
                    0.0
                } else {
                    hi - lo
                }
            }
            Relation::Linear { coeffs, rhs } => {
                (coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() - rhs).abs()
            }
            Relation::Edge { physics } => {
                let k = physics.components();
                let (pi, pj) = (&x[0..k], &x[k..2 * k]);
                let (fij, fji) = (&x[2 * k..3 * k], &x[3 * k..4 * k]);
                let (Ok(a), Ok(b)) = (
                    physics.flow(pi, pj, Direction::Forward),
                    physics.flow(pi, pj, Direction::Reverse),
                ) else {
                    return f64::INFINITY;
                };
                let pad = match physics {
                    PhysicsKind::CustomTable { pad, .. } => *pad,
                    _ => 0.0,
                };
                let mut r = 0.0f64;
                for c in 0..k {
                    r = r.max((fij[c] - a[c]).abs() - pad).max((fji[c] - b[c]).abs() - pad);
                }
                r.max(0.0)
            }
            Relation::Transform { kind, components } => {
                let k = *components;
                let (pin, pout) = (&x[0..k], &x[k..2 * k]);
                let ratio = x.get(2 * k).copied();
                match crate::network::apply_transform(kind, pin, ratio) {
                    Ok(t) => t.iter().zip(pout).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                    Err(_) => f64::INFINITY,
                }
            }
            Relation::AbsSumBand { lower, upper } => {
                let s = x.iter().sum::<f64>().abs();
                (lower - s).max(s - upper).max(0.0)
            }
        }
    }

    /// Interval feasibility test over a box.
    pub fn test(&self, b: &[Interval]) -> Verdict {
        match self {
            Relation::Equal => {
                let lo = b.iter().map(|i| i.lo).fold(f64::NEG_INFINITY, f64::max);
                let hi = b.iter().map(|i| i.hi).fold(f64::INFINITY, f64::min);
                if lo <= hi {
                    Verdict::Certain
                } else {
                    Verdict::Infeasible
                }
            }
            Relation::Linear { coeffs, rhs } => {
                let out = linear_range(coeffs, b).add_scalar(-rhs);
                if !out.contains(0.0) {
                    return Verdict::Infeasible;
                }
                match linear_range_inner(coeffs, b) {
                    Some(inner) if inner.lo <= *rhs && *rhs <= inner.hi => Verdict::Certain,
                    _ => Verdict::Possible,
                }
            }
            Relation::Edge { physics } => edge_test(physics, b),
            Relation::Transform { .. } => {
                let pts: Vec<f64> = b.iter().map(|i| i.mid()).collect();
                for p in 0..b.len() {
                    if self.project(b, p).is_none() {
                        return Verdict::Infeasible;
                    }
                }
                if b.iter().all(|i| i.is_point()) && self.residual(&pts) == 0.0 {
                    Verdict::Certain
                } else {
                    Verdict::Possible
                }
            }
            Relation::AbsSumBand { lower, upper } => {
                let s = b.iter().fold(Interval::point(0.0), |a, x| a + *x);
                let abs = abs_range(s);
                if abs.hi < *lower || abs.lo > *upper {
                    Verdict::Infeasible
                } else if abs.lo >= *lower && abs.hi <= *upper {
                    Verdict::Certain
                } else {
                    Verdict::Possible
                }
            }
        }
    }

    /// Outer projection of `relation ∩ box` onto coordinate `pos`, intersected with
    /// `b[pos]`. `None` when the box provably misses the relation.
    pub fn project(&self, b: &[Interval], pos: usize) -> Option<Interval> {
        let own = b[pos];
        match self {
            Relation::Equal => {
                let lo = b.iter().map(|i| i.lo).fold(f64::NEG_INFINITY, f64::max);
                let hi = b.iter().map(|i| i.hi).fold(f64::INFINITY, f64::min);
                Interval::try_new(lo, hi)
            }
            Relation::Linear { coeffs, rhs } => {
                let c = coeffs[pos];
                let mut rest = Interval::point(0.0);
                for (k, (ck, bk)) in coeffs.iter().zip(b).enumerate() {
                    if k != pos {
                        rest = rest + bk.scale(*ck);
                    }
                }
                let t = Interval::point(*rhs) - rest;
                if c == 0.0 {
                    return if t.contains(0.0) { Some(own) } else { None };
                }
                let x = t.div(&Interval::point(c))?;
                x.intersect(&own)
            }
            Relation::Edge { physics } => edge_project(physics, b, pos),
            Relation::Transform { kind, components } => transform_project(kind, *components, b, pos),
            Relation::AbsSumBand { lower, upper } => {
                let mut rest = Interval::point(0.0);
                for (k, bk) in b.iter().enumerate() {
                    if k != pos {
                        rest = rest + *bk;
                    }
                }
                let up = (Interval::new(*lower, *upper) - rest).intersect(&own);
                let dn = (Interval::new(-upper, -lower) - rest).intersect(&own);
                match (up, dn) {
                    (Some(a), Some(c)) => Some(a.hull(&c)),
                    (a, c) => a.or(c),
                }
            }
        }
    }
}

fn linear_range(c: &[f64], b: &[Interval]) -> Interval {
    c.iter().zip(b).fold(Interval::point(0.0), |acc, (a, x)| acc + x.scale(*a))
}

/// Values of the linear form attained for sure (inward rounding).
fn linear_range_inner(c: &[f64], b: &[Interval]) -> Option<Interval> {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (a, x) in c.iter().zip(b) {
        let (l, h) = if *a >= 0.0 { (x.lo, x.hi) } else { (x.hi, x.lo) };
        lo = round::add_up(lo, round::mul_up(*a, l));
        hi = round::add_down(hi, round::mul_down(*a, h));
    }
    Interval::try_new(lo, hi)
}

fn abs_range(s: Interval) -> Interval {
    if s.lo >= 0.0 {
        s
    } else if s.hi <= 0.0 {
        -s
    } else {
        Interval::new(0.0, s.mag())
    }
}

/// Effective box for `phi_ij` of an antisymmetric edge: `b_ij ∩ -b_ji`.
fn antisym_flow_box(b: &[Interval]) -> Option<Interval> {
    b[2].intersect(&(-b[3]))
}

fn edge_test(physics: &PhysicsKind, b: &[Interval]) -> Verdict {
    let k = physics.components();
    if let Some((law, off)) = physics.monotone_law() {
        let Some(y) = antisym_flow_box(b) else {
            return Verdict::Infeasible;
        };
        let d = (b[0] - b[1]).add_scalar(off);
        let g = law.enclose(d);
        if !g.intersects(&y) {
            return Verdict::Infeasible;
        }
        let din = Interval::try_new(
            round::add_up(round::sub_up(b[0].lo, b[1].hi), off),
            round::add_down(round::sub_down(b[0].hi, b[1].lo), off),
        );
        return match din.and_then(|d| law.enclose_inner(d)) {
            Some(gi) if gi.intersects(&y) => Verdict::Certain,
            _ => Verdict::Possible,
        };
    }
    let (bi, bj) = (&b[0..k], &b[k..2 * k]);
    let (Ok(fwd), Ok(rev)) = (
        physics.flow_enclosure(bi, bj, Direction::Forward),
        physics.flow_enclosure(bi, bj, Direction::Reverse),
    ) else {
        return Verdict::Infeasible;
    };
    for c in 0..k {
        if !fwd[c].intersects(&b[2 * k + c]) || !rev[c].intersects(&b[3 * k + c]) {
            return Verdict::Infeasible;
        }
    }
    if physics.is_antisymmetric() {
        for c in 0..k {
            if b[2 * k + c].intersect(&(-b[3 * k + c])).is_none() {
                return Verdict::Infeasible;
            }
        }
    }
    if matches!(physics, PhysicsKind::CustomTable { .. }) {
        return Verdict::Possible;
    }
    let mi: Vec<f64> = bi.iter().map(|i| i.mid()).collect();
    let mj: Vec<f64> = bj.iter().map(|i| i.mid()).collect();
    if let (Ok(f), Ok(r)) = (
        physics.flow(&mi, &mj, Direction::Forward),
        physics.flow(&mi, &mj, Direction::Reverse),
    ) {
        if (0..k).all(|c| b[2 * k + c].contains(f[c]) && b[3 * k + c].contains(r[c])) {
            return Verdict::Certain;
        }
    }
    Verdict::Possible
}

fn edge_project(physics: &PhysicsKind, b: &[Interval], pos: usize) -> Option<Interval> {
    let k = physics.components();
    let own = b[pos];
    if let Some((law, off)) = physics.monotone_law() {
        let y = antisym_flow_box(b)?;
        let d = (b[0] - b[1]).add_scalar(off);
        let g = law.enclose(d).intersect(&y)?;
        return match pos {
            2 => g.intersect(&own),
            3 => (-g).intersect(&own),
            0 => monotone_potential(law, off, b[0], b[1], y, true),
            _ => monotone_potential(law, off, b[1], b[0], y, false),
        };
    }
    let (bi, bj) = (&b[0..k], &b[k..2 * k]);
    let fwd = physics.flow_enclosure(bi, bj, Direction::Forward).ok()?;
    let rev = physics.flow_enclosure(bi, bj, Direction::Reverse).ok()?;
    let mut fb: Vec<Interval> = Vec::with_capacity(2 * k);
    for c in 0..k {
        fb.push(fwd[c].intersect(&b[2 * k + c])?);
    }
    for c in 0..k {
        fb.push(rev[c].intersect(&b[3 * k + c])?);
    }
    if physics.is_antisymmetric() {
        for c in 0..k {
            let m = fb[c].intersect(&(-fb[k + c]))?;
            fb[c] = m;
            fb[k + c] = -m;
        }
    }
    if pos >= 2 * k {
        return Some(fb[pos - 2 * k]);
    }
    if let PhysicsKind::AcCurrentVoltage { r, x } = physics {
        // J = y (V_i - V_j) is linear, so V_i - V_j = z J and each side can be inverted
        let (zr, zx) = (Interval::point(*r), Interval::point(*x));
        let (jr, ji) = (fb[0], fb[1]);
        let dv = [zr * jr - zx * ji, zr * ji + zx * jr];
        let c = pos % k;
        return if pos < k { (bj[c] + dv[c]).intersect(&own) } else { (bi[c] - dv[c]).intersect(&own) };
    }
    Some(own)
}

/// Projection of a monotone edge law onto one endpoint potential.
///
/// `own` is the potential being projected, `other` the opposite endpoint, `y` the
/// allowed forward-flow box. `from_side` says whether `own` is `pi_ij` (flow
/// increasing in it) or `pi_ji` (flow decreasing in it). Both bounds are settled
/// with directed-rounding predicates, so the result is an outer bound that is exact
/// whenever the inverse of the law is exactly representable.
fn monotone_potential(law: Law<'_>, off: f64, own: Interval, other: Interval, y: Interval, from_side: bool) -> Option<Interval> {
    let d_min = |x: f64| {
        if from_side {
            round::add_down(round::sub_down(x, other.hi), off)
        } else {
            round::add_down(round::sub_down(other.lo, x), off)
        }
    };
    let d_max = |x: f64| {
        if from_side {
            round::add_up(round::sub_up(x, other.lo), off)
        } else {
            round::add_up(round::sub_up(other.hi, x), off)
        }
    };
    let inv = exact_inverse(law, y);
    let reaches_lo = |x: f64| {
        let d = d_max(x);
        law.eval_up(d) >= y.lo && inv.map_or(true, |(a, _)| d >= a)
    };
    let stays_hi = |x: f64| {
        let d = d_min(x);
        law.eval_down(d) <= y.hi && inv.map_or(true, |(_, b)| d <= b)
    };
    let dlo = law.inverse(y.lo, true);
    let dhi = law.inverse(y.hi, false);
    if from_side {
        let lo = first_true(own, dlo - off + other.lo, reaches_lo)?;
        let hi = last_true(own, dhi - off + other.hi, stays_hi)?;
        Interval::try_new(lo, hi)
    } else {
        let lo = first_true(own, other.lo + off - dhi, stays_hi)?;
        let hi = last_true(own, other.hi + off - dlo, reaches_lo)?;
        Interval::try_new(lo, hi)
    }
}

/// Outward bounds `(down(g^-1(y.lo)), up(g^-1(y.hi)))` for power laws whose inverse
/// is computable with directed rounding.
fn exact_inverse(law: Law<'_>, y: Interval) -> Option<(f64, f64)> {
    let Law::Power { coef, exponent } = law else {
        return None;
    };
    // |v| / coef raised to 1 / exponent, rounded the requested way
    let mag = |v: f64, up: bool| -> Option<f64> {
        let q = if up { round::div_up(v, coef) } else { round::div_down(v, coef) };
        Some(match (exponent, up) {
            (e, true) if e == 0.5 => round::mul_up(q, q),
            (e, false) if e == 0.5 => round::mul_down(q, q),
            (e, _) if e == 1.0 => q,
            (e, true) if e == 2.0 => round::sqrt_up(q),
            (e, false) if e == 2.0 => round::sqrt_down(q),
            _ => return None,
        })
    };
    let down = |v: f64| if v >= 0.0 { mag(v, false) } else { mag(-v, true).map(|m| -m) };
    let up = |v: f64| if v >= 0.0 { mag(v, true) } else { mag(-v, false).map(|m| -m) };
    let a = if y.lo.is_finite() { down(y.lo)? } else { f64::NEG_INFINITY };
    let b = if y.hi.is_finite() { up(y.hi)? } else { f64::INFINITY };
    Some((a, b))
}

#[inline]
fn key(x: f64) -> i128 {
    let b = x.to_bits() as i64;
    (if b < 0 { i64::MIN - b } else { b }) as i128
}

#[inline]
fn unkey(k: i128) -> f64 {
    let k = k as i64;
    let b = if k < 0 { i64::MIN - k } else { k };
    f64::from_bits(b as u64)
}

/// Smallest float in `dom` where the monotone predicate `p` (false then true) holds,
/// searched near `cand` first.
fn first_true(dom: Interval, cand: f64, p: impl Fn(f64) -> bool) -> Option<f64> {
    if p(dom.lo) {
        return Some(dom.lo);
    }
    if !p(dom.hi) {
        return None;
    }
    let (mut a, mut z) = (key(dom.lo), key(dom.hi));
    if cand.is_finite() && dom.lo < cand && cand < dom.hi {
        let c = key(cand);
        let mut step: i128 = 1;
        if p(cand) {
            z = c;
            while z - step > a {
                if p(unkey(z - step)) {
                    z -= step;
                    step *= 2;
                } else {
                    a = z - step;
                    break;
                }
            }
        } else {
            a = c;
            while a + step < z {
                if p(unkey(a + step)) {
                    z = a + step;
                    break;
                }
                a += step;
                step *= 2;
            }
        }
    }
    while z - a > 1 {
        let m = a + (z - a) / 2;
        if p(unkey(m)) {
            z = m;
        } else {
            a = m;
        }
    }
    Some(unkey(z))
}

/// Largest float in `dom` where the monotone predicate `p` (true then false) holds.
fn last_true(dom: Interval, cand: f64, p: impl Fn(f64) -> bool) -> Option<f64> {
    first_true(-dom, -cand, |x| p(-x)).map(|x| -x)
}

fn transform_project(kind: &TransformKind, k: usize, b: &[Interval], pos: usize) -> Option<Interval> {
    let own = b[pos];
    match kind {
        TransformKind::Multiplicative(a) if k == 1 => {
            let al = Interval::point(a[0]);
            if pos == 0 {
                b[1].div(&al)?.intersect(&own)
            } else {
                (b[0] * al).intersect(&own)
            }
        }
        TransformKind::Multiplicative(a) => {
            let (ar, ai) = (Interval::point(a[0]), Interval::point(a[1]));
            if pos >= 2 {
                let img = [ar * b[0] - ai * b[1], ar * b[1] + ai * b[0]];
                img[pos - 2].intersect(&own)
            } else {
                let m = ar.sqr() + ai.sqr();
                let (cr, ci) = (ar.div(&m).unwrap_or(ar), (-ai).div(&m).unwrap_or(-ai));
                let pre = [cr * b[2] - ci * b[3], cr * b[3] + ci * b[2]];
                pre[pos].intersect(&own)
            }
        }
        TransformKind::VariableRatio { .. } => match pos {
            0 => b[1].div(&b[2])?.intersect(&own),
            1 => (b[0] * b[2]).intersect(&own),
            _ => match b[1].div(&b[0]) {
                Some(r) => r.intersect(&own),
                None => {
                    (b[0] * b[2]).intersect(&b[1])?;
                    Some(own)
                }
            },
        },
        TransformKind::Additive(o) => {
            let c = pos % k;
            if pos < k {
                b[k + c].add_scalar(-o[c]).intersect(&own)
            } else {
                b[c].add_scalar(o[c]).intersect(&own)
            }
        }
        TransformKind::Tabulated { x, y } => {
            let img = table_range(x, y, b[0]);
            let out = img.intersect(&b[1])?;
            if pos == 1 {
                Some(out)
            } else {
                Some(own)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn gas_edge() -> Relation {
        Relation::Edge { physics: PhysicsKind::Gas { gamma: 1.0, offset: 0.0 } }
    }

    #[test]
    fn gas_inversion_is_exact() {
        let r = gas_edge();
        let b = [
            Interval::new(0.0, 10.0),
            Interval::new(0.0, 1.0),
            Interval::new(1.0, 2.0),
            Interval::new(-10.0, 10.0),
        ];
        assert_eq!(r.project(&b, 0), Some(Interval::new(1.0, 5.0)));
    }

    #[test]
    fn gas_cell_outside_enclosure_is_refuted() {
        let r = gas_edge();
        let b = [
            Interval::new(0.0, 4.0),
            Interval::new(0.0, 4.0),
            Interval::new(3.0, 4.0),
            Interval::new(-10.0, 10.0),
        ];
        assert_eq!(r.test(&b), Verdict::Infeasible);
    }

    #[test]
    fn reverse_side_projection() {
        // phi_01 = sqrt(25 - pi_1) = 2 forces pi_1 = 21
        let r = gas_edge();
        let b = [
            Interval::point(25.0),
            Interval::new(0.0, 25.0),
            Interval::new(-5.0, 5.0),
            Interval::point(-2.0),
        ];
        assert_eq!(r.project(&b, 1), Some(Interval::point(21.0)));
        assert_eq!(r.project(&b, 2), Some(Interval::point(2.0)));
    }

    #[test]
    fn conservation_block() {
        let r = Relation::Linear { coeffs: vec![1.0, -1.0], rhs: 0.0 };
        assert_ne!(r.test(&[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)]), Verdict::Infeasible);
        assert_eq!(r.project(&[Interval::point(-2.0), Interval::new(-5.0, 5.0)], 1), Some(Interval::point(-2.0)));
    }

    #[test]
    fn equality_projection() {
        let r = Relation::Equal;
        let b = [Interval::new(0.0, 10.0), Interval::new(2.0, 3.0)];
        assert_eq!(r.project(&b, 0), Some(Interval::new(2.0, 3.0)));
    }

    #[test]
    fn abs_band() {
        let r = Relation::AbsSumBand { lower: 3.0, upper: 10.0 };
        assert_eq!(r.test(&[Interval::point(1.0), Interval::point(1.0)]), Verdict::Infeasible);
        let r = Relation::AbsSumBand { lower: 0.0, upper: 100.0 };
        assert_eq!(r.test(&[Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)]), Verdict::Certain);
    }

    #[test]
    fn first_true_finds_boundary() {
        let dom = Interval::new(0.0, 100.0);
        for cand in [f64::NAN, 0.5, 17.0, 42.0, 99.0] {
            assert_eq!(first_true(dom, cand, |x| x >= 17.25), Some(17.25));
            assert_eq!(last_true(dom, cand, |x| x <= 17.25), Some(17.25));
        }
        assert_eq!(first_true(dom, 1.0, |x| x >= 200.0), None);
        let neg = Interval::new(-5.0, -1.0);
        assert_eq!(first_true(neg, -3.0, |x| x >= -2.5), Some(-2.5));
    }
}
