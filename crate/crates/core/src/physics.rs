//! Edge physics: point evaluation and interval enclosures.
//!
//! Potentials and flows are small vectors with one entry per component. AC kinds
//! use two components, the rectangular real and imaginary parts.

use alloc::vec;
use alloc::vec::Vec;

use crate::cost::segment;
use crate::interval::{round, Interval};
use crate::{Error, Result};

/// Which directed flow of an edge `(i, j)` is requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `phi_ij`, leaving the `from` node.
    Forward,
    /// `phi_ji`, leaving the `to` node.
    Reverse,
}

/// Monotone nondecreasing scalar law `g`, the inverse marginal energy of a
/// dissipative edge.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowLaw {
    /// `coef * sign(d) * |d|^exponent`
    Power { coef: f64, exponent: f64 },
    /// Linear interpolation through `(x[k], y[k])`, extended linearly past both ends.
    Table { x: Vec<f64>, y: Vec<f64> },
}

/// Borrowed view of a monotone law, shared by gas and dissipative edges.
#[derive(Clone, Copy, Debug)]
pub enum Law<'a> {
    Power { coef: f64, exponent: f64 },
    Table { x: &'a [f64], y: &'a [f64] },
}

impl FlowLaw {
    pub fn view(&self) -> Law<'_> {
        match self {
            FlowLaw::Power { coef, exponent } => Law::Power { coef: *coef, exponent: *exponent },
            FlowLaw::Table { x, y } => Law::Table { x, y },
        }
    }

    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        match self {
            FlowLaw::Power { coef, exponent } => {
                if !(coef.is_finite() && *coef > 0.0) {
                    v.push("dissipative coefficient must be positive");
                }
                if !(exponent.is_finite() && *exponent > 0.0) {
                    v.push("dissipative exponent must be positive");
                }
            }
            FlowLaw::Table { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    v.push("dissipative table needs at least two (x, y) pairs of equal length");
                } else if x.iter().chain(y.iter()).any(|a| !a.is_finite()) {
                    v.push("dissipative table entries must be finite");
                } else {
                    if x.windows(2).any(|w| w[0] >= w[1]) {
                        v.push("dissipative table abscissae must be strictly increasing");
                    }
                    if y.windows(2).any(|w| w[0] > w[1]) {
                        v.push("inverse marginal energy must be monotone nondecreasing");
                    }
                }
            }
        }
        v
    }
}

impl Law<'_> {
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            Law::Power { coef, exponent } => {
                if d == 0.0 {
                    return 0.0;
                }
                let a = d.abs();
                let m = if exponent == 0.5 {
                    libm::sqrt(a)
                } else if exponent == 1.0 {
                    a
                } else if exponent == 2.0 {
                    a * a
                } else {
                    libm::pow(a, exponent)
                };
                if d > 0.0 {
                    coef * m
                } else {
                    -(coef * m)
                }
            }
            Law::Table { x, y } => {
                let k = segment(x, d);
                y[k] + (d - x[k]) * ((y[k + 1] - y[k]) / (x[k + 1] - x[k]))
            }
        }
    }

    /// Lower bound of the exact value at `d`.
    pub fn eval_down(&self, d: f64) -> f64 {
        match *self {
            Law::Power { coef, exponent } => {
                if d >= 0.0 {
                    round::mul_down(coef, round::pow_down(d, exponent))
                } else {
                    -round::mul_up(coef, round::pow_up(-d, exponent))
                }
            }
            Law::Table { x, y } => table_box(x, y, d).lo,
        }
    }

    pub fn eval_up(&self, d: f64) -> f64 {
        match *self {
            Law::Power { coef, exponent } => {
                if d >= 0.0 {
                    round::mul_up(coef, round::pow_up(d, exponent))
                } else {
                    -round::mul_down(coef, round::pow_down(-d, exponent))
                }
            }
            Law::Table { x, y } => table_box(x, y, d).hi,
        }
    }

    /// Outer enclosure of `g` over `d`; exact up to rounding since `g` is monotone.
    pub fn enclose(&self, d: Interval) -> Interval {
        Interval::new(self.eval_down(d.lo), self.eval_up(d.hi))
    }

    /// Inner enclosure: every value in it is attained by some point of `d`.
    pub fn enclose_inner(&self, d: Interval) -> Option<Interval> {
        Interval::try_new(self.eval_up(d.lo), self.eval_down(d.hi))
    }

    /// Approximate `d` with `g(d) = v`; the smallest such `d` when `lower`, else the
    /// largest. Infinite when `v` is never reached on that side.
    pub fn inverse(&self, v: f64, lower: bool) -> f64 {
        match *self {
            Law::Power { coef, exponent } => {
                let a = (v.abs() / coef).powf_compat(1.0 / exponent);
                if v >= 0.0 {
                    a
                } else {
                    -a
                }
            }
            Law::Table { x, y } => {
                let n = x.len();
                let s0 = (y[1] - y[0]) / (x[1] - x[0]);
                let sn = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
                if v < y[0] || (v == y[0] && lower && s0 > 0.0) {
                    return if s0 > 0.0 { x[0] + (v - y[0]) / s0 } else if v < y[0] { f64::NEG_INFINITY } else { x[0] };
                }
                if v > y[n - 1] || (v == y[n - 1] && !lower && sn > 0.0) {
                    return if sn > 0.0 { x[n - 1] + (v - y[n - 1]) / sn } else if v > y[n - 1] { f64::INFINITY } else { x[n - 1] };
                }
                if lower {
                    if v == y[0] && s0 == 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    for k in 0..n - 1 {
                        if v <= y[k + 1] {
                            if y[k + 1] == y[k] {
                                return x[k];
                            }
                            return x[k] + (v - y[k]) * (x[k + 1] - x[k]) / (y[k + 1] - y[k]);
                        }
                    }
                    x[n - 1]
                } else {
                    if v == y[n - 1] && sn == 0.0 {
                        return f64::INFINITY;
                    }
                    for k in (0..n - 1).rev() {
                        if v >= y[k] {
                            if y[k + 1] == y[k] {
                                return x[k + 1];
                            }
                            return x[k] + (v - y[k]) * (x[k + 1] - x[k]) / (y[k + 1] - y[k]);
                        }
                    }
                    x[0]
                }
            }
        }
    }
}

trait PowfCompat {
    fn powf_compat(self, e: f64) -> f64;
}

impl PowfCompat for f64 {
    #[inline]
    fn powf_compat(self, e: f64) -> f64 {
        if e == 2.0 {
            self * self
        } else if e == 1.0 {
            self
        } else if e == 0.5 {
            libm::sqrt(self)
        } else {
            libm::pow(self, e)
        }
    }
}

/// Enclosure of a piecewise-linear table at a single abscissa.
fn table_box(x: &[f64], y: &[f64], d: f64) -> Interval {
    let k = segment(x, d);
    let dy = Interval::point(y[k + 1]) - Interval::point(y[k]);
    let dx = Interval::point(x[k + 1]) - Interval::point(x[k]);
    let s = dy.div(&dx).unwrap_or(Interval::point(0.0));
    Interval::point(y[k]) + (Interval::point(d) - Interval::point(x[k])) * s
}

/// Enclosure of a piecewise-linear table over an interval of abscissae.
pub(crate) fn table_range(x: &[f64], y: &[f64], d: Interval) -> Interval {
    let mut r = table_box(x, y, d.lo).hull(&table_box(x, y, d.hi));
    for (k, &xk) in x.iter().enumerate() {
        if d.lo < xk && xk < d.hi {
            r = r.hull(&Interval::point(y[k]));
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhysicsKind {
    /// Weymouth relation on squared pressures: `gamma * sign(D) * sqrt|D|`,
    /// `D = pi_i - pi_j + offset`.
    Gas { gamma: f64, offset: f64 },
    /// Complex power `V_i * conj((V_i - V_j)/z)`, `z = r + i x`.
    AcPowerVoltage { r: f64, x: f64 },
    /// Complex current `(V_i - V_j)/z`.
    AcCurrentVoltage { r: f64, x: f64 },
    /// `g(pi_i - pi_j)` for a monotone law `g`.
    Dissipative { law: FlowLaw },
    /// Sampled `phi_ij = f(pi_i - pi_j)` known to within `pad`.
    CustomTable { delta: Vec<f64>, flow: Vec<f64>, pad: f64 },
}

impl PhysicsKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhysicsKind::Gas { .. } => "gas",
            PhysicsKind::AcPowerVoltage { .. } => "ac-power",
            PhysicsKind::AcCurrentVoltage { .. } => "ac-current",
            PhysicsKind::Dissipative { .. } => "dissipative",
            PhysicsKind::CustomTable { .. } => "custom-table",
        }
    }

    /// Number of components the kind works on.
    pub fn components(&self) -> usize {
        match self {
            PhysicsKind::AcPowerVoltage { .. } | PhysicsKind::AcCurrentVoltage { .. } => 2,
            _ => 1,
        }
    }

    /// True when `phi_ji = -phi_ij` identically.
    pub fn is_antisymmetric(&self) -> bool {
        !matches!(self, PhysicsKind::AcPowerVoltage { .. })
    }

    /// Monotone law and additive offset, for the scalar monotone kinds.
    pub fn monotone_law(&self) -> Option<(Law<'_>, f64)> {
        match self {
            PhysicsKind::Gas { gamma, offset } => Some((Law::Power { coef: *gamma, exponent: 0.5 }, *offset)),
            PhysicsKind::Dissipative { law } => Some((law.view(), 0.0)),
            _ => None,
        }
    }

    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        match self {
            PhysicsKind::Gas { gamma, offset } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    v.push("gas conductance must be positive");
                }
                if !offset.is_finite() {
                    v.push("gas offset must be finite");
                }
            }
            PhysicsKind::AcPowerVoltage { r, x } | PhysicsKind::AcCurrentVoltage { r, x } => {
                if !(r.is_finite() && x.is_finite()) {
                    v.push("impedance must be finite");
                } else if *r == 0.0 && *x == 0.0 {
                    v.push("impedance must be nonzero");
                } else if *r < 0.0 {
                    v.push("resistance must be nonnegative");
                }
            }
            PhysicsKind::Dissipative { law } => v.extend(law.violations()),
            PhysicsKind::CustomTable { delta, flow, pad } => {
                if delta.len() < 2 || delta.len() != flow.len() {
                    v.push("custom table needs at least two (delta, flow) pairs of equal length");
                } else if delta.iter().chain(flow.iter()).any(|a| !a.is_finite()) {
                    v.push("custom table entries must be finite");
                } else if delta.windows(2).any(|w| w[0] >= w[1]) {
                    v.push("custom table abscissae must be strictly increasing");
                }
                if !(pad.is_finite() && *pad >= 0.0) {
                    v.push("custom table pad must be finite and nonnegative");
                }
            }
        }
        v
    }

    /// Admittance `1/z` as `(g, b)`.
    pub fn admittance(r: f64, x: f64) -> (f64, f64) {
        let d = r * r + x * x;
        (r / d, -x / d)
    }

    fn admittance_box(r: f64, x: f64) -> (Interval, Interval) {
        let d = Interval::point(r).sqr() + Interval::point(x).sqr();
        let g = Interval::point(r).div(&d).unwrap_or(Interval::point(0.0));
        let b = Interval::point(-x).div(&d).unwrap_or(Interval::point(0.0));
        (g, b)
    }

    /// Flow `f_ij(pi_i, pi_j)` (forward) or `f_ji(pi_j, pi_i)` (reverse). `pi_i` belongs
    /// to the edge's `from` node in both cases.
    pub fn flow(&self, pi_i: &[f64], pi_j: &[f64], dir: Direction) -> Result<Vec<f64>> {
        if pi_i.iter().chain(pi_j).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        let k = self.components();
        if pi_i.len() != k || pi_j.len() != k {
            return Err(Error::InvalidArgument("potential vector length does not match the physics kind".into()));
        }
        let out = match self {
            PhysicsKind::Gas { .. } | PhysicsKind::Dissipative { .. } => {
                let (law, b) = self.monotone_law().unwrap();
                let v = law.eval((pi_i[0] - pi_j[0]) + b);
                vec![if dir == Direction::Forward { v } else { -v }]
            }
            PhysicsKind::CustomTable { delta, flow, .. } => {
                let v = Law::Table { x: delta, y: flow }.eval(pi_i[0] - pi_j[0]);
                vec![if dir == Direction::Forward { v } else { -v }]
            }
            PhysicsKind::AcPowerVoltage { r, x } => {
                let (g, b) = Self::admittance(*r, *x);
                let (a, o) = match dir {
                    Direction::Forward => (pi_i, pi_j),
                    Direction::Reverse => (pi_j, pi_i),
                };
                let de = a[0] - o[0];
                let df = a[1] - o[1];
                let ir = g * de - b * df;
                let ii = g * df + b * de;
                vec![a[0] * ir + a[1] * ii, a[1] * ir - a[0] * ii]
            }
            PhysicsKind::AcCurrentVoltage { r, x } => {
                let (g, b) = Self::admittance(*r, *x);
                let de = pi_i[0] - pi_j[0];
                let df = pi_i[1] - pi_j[1];
                let ir = g * de - b * df;
                let ii = g * df + b * de;
                match dir {
                    Direction::Forward => vec![ir, ii],
                    Direction::Reverse => vec![-ir, -ii],
                }
            }
        };
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("flow"));
        }
        Ok(out)
    }

    /// Sound enclosure of the requested flow over boxes of endpoint potentials.
    pub fn flow_enclosure(&self, bi: &[Interval], bj: &[Interval], dir: Direction) -> Result<Vec<Interval>> {
        if bi.iter().chain(bj).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        let out = match self {
            PhysicsKind::Gas { .. } | PhysicsKind::Dissipative { .. } => {
                let (law, b) = self.monotone_law().unwrap();
                let v = law.enclose((bi[0] - bj[0]).add_scalar(b));
                vec![if dir == Direction::Forward { v } else { -v }]
            }
            PhysicsKind::CustomTable { delta, flow, pad } => {
                let v = table_range(delta, flow, bi[0] - bj[0]);
                let v = Interval::new(round::sub_down(v.lo, *pad), round::add_up(v.hi, *pad));
                vec![if dir == Direction::Forward { v } else { -v }]
            }
            PhysicsKind::AcPowerVoltage { r, x } => {
                let (g, b) = Self::admittance_box(*r, *x);
                let (a, o) = match dir {
                    Direction::Forward => (bi, bj),
                    Direction::Reverse => (bj, bi),
                };
                ac_power_box(g, b, a, o)
            }
            PhysicsKind::AcCurrentVoltage { r, x } => {
                let (g, b) = Self::admittance_box(*r, *x);
                let de = bi[0] - bj[0];
                let df = bi[1] - bj[1];
                let ir = g * de - b * df;
                let ii = g * df + b * de;
                match dir {
                    Direction::Forward => vec![ir, ii],
                    Direction::Reverse => vec![-ir, -ii],
                }
            }
        };
        Ok(out)
    }
}

/// Natural interval extension of the rectangular power formula, with the
/// sub-expressions arranged as in the point evaluation.
pub(crate) fn ac_power_box(g: Interval, b: Interval, a: &[Interval], o: &[Interval]) -> Vec<Interval> {
    let de = a[0] - o[0];
    let df = a[1] - o[1];
    let ir = g * de - b * df;
    let ii = g * df + b * de;
    vec![a[0] * ir + a[1] * ii, a[1] * ir - a[0] * ii]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gas() -> PhysicsKind {
        PhysicsKind::Gas { gamma: 1.0, offset: 0.0 }
    }

    #[test]
    fn gas_point_values() {
        let g = gas();
        assert_eq!(g.flow(&[4.0], &[0.0], Direction::Forward).unwrap(), vec![2.0]);
        assert_eq!(g.flow(&[3.0], &[3.0], Direction::Forward).unwrap(), vec![0.0]);
        assert_eq!(g.flow(&[0.0], &[4.0], Direction::Forward).unwrap(), vec![-2.0]);
        assert_eq!(g.flow(&[4.0], &[0.0], Direction::Reverse).unwrap(), vec![-2.0]);
    }

    #[test]
    fn non_finite_potential_is_rejected() {
        assert_eq!(gas().flow(&[f64::NAN], &[0.0], Direction::Forward), Err(Error::NonFinite("potential")));
    }

    #[test]
    fn ac_power_point_value() {
        let ac = PhysicsKind::AcPowerVoltage { r: 1.0, x: 0.0 };
        assert_eq!(ac.flow(&[2.0, 0.0], &[1.0, 0.0], Direction::Forward).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn gas_enclosures_are_exact() {
        let g = gas();
        let e = g
            .flow_enclosure(&[Interval::new(0.0, 4.0)], &[Interval::new(0.0, 4.0)], Direction::Forward)
            .unwrap();
        assert_eq!(e[0], Interval::new(-2.0, 2.0));
        let e = g
            .flow_enclosure(&[Interval::point(4.0)], &[Interval::point(0.0)], Direction::Forward)
            .unwrap();
        assert_eq!(e[0], Interval::point(2.0));
    }

    #[test]
    fn ac_enclosure_covers_samples() {
        let ac = PhysicsKind::AcPowerVoltage { r: 1.0, x: 0.0 };
        let bi = [Interval::new(1.0, 2.0), Interval::point(0.0)];
        let bj = [Interval::point(1.0), Interval::point(0.0)];
        let e = ac.flow_enclosure(&bi, &bj, Direction::Forward).unwrap();
        assert!(e[0].lo <= 0.0 && e[0].hi >= 2.0);
        for k in 0..=1000 {
            let vi = 1.0 + k as f64 / 1000.0;
            let p = ac.flow(&[vi, 0.0], &[1.0, 0.0], Direction::Forward).unwrap();
            assert!(e[0].contains(p[0]) && e[1].contains(p[1]));
        }
    }

    #[test]
    fn table_inverse_handles_flats() {
        let law = Law::Table { x: &[0.0, 1.0, 2.0, 3.0], y: &[0.0, 1.0, 1.0, 2.0] };
        assert_eq!(law.inverse(1.0, true), 1.0);
        assert_eq!(law.inverse(1.0, false), 2.0);
        assert_eq!(law.inverse(0.5, true), 0.5);
        assert_eq!(law.inverse(3.0, true), 4.0);
    }

    #[test]
    fn power_law_bounds_bracket_point_values() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..2000 {
            let law = Law::Power { coef: rng.gen_range(0.1..3.0), exponent: rng.gen_range(0.3..2.5) };
            let d = rng.gen_range(-10.0..10.0);
            let v = law.eval(d);
            assert!(law.eval_down(d) <= v && v <= law.eval_up(d));
        }
    }
}
