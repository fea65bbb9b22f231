//! Cost functions and factor functions with certified cell lower bounds.
//!
//! `lower_bound` returns a value that does not exceed the floating-point evaluation
//! of the function at any point of the box. Closed-form minima are lowered by a
//! guard of a few ulps of the term magnitudes to absorb evaluation rounding.

use alloc::vec::Vec;

use crate::interval::{round, Interval};
use crate::{Error, Result};

const GUARD: f64 = 16.0 * f64::EPSILON;

#[inline]
fn guarded(v: f64, magnitude: f64) -> f64 {
    round::sub_down(v, GUARD * magnitude)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CostFunction {
    /// `a + b x`
    Affine { a: f64, b: f64 },
    /// `a + b x + c x^2`; `c < 0` is accepted and flagged non-convex.
    Quadratic { a: f64, b: f64, c: f64 },
    /// Linear interpolation through `(x[k], y[k])`, extended linearly past both ends.
    PiecewiseLinear { x: Vec<f64>, y: Vec<f64> },
    /// `weight * |x - reference|`
    AbsDeviation { weight: f64, reference: f64 },
    /// `sum coeffs[k] x^k`, bounded by interval arithmetic.
    Polynomial { coeffs: Vec<f64> },
}

impl CostFunction {
    pub fn zero() -> Self {
        CostFunction::Affine { a: 0.0, b: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CostFunction::Affine { a, b } if *a == 0.0 && *b == 0.0)
    }

    pub fn is_convex(&self) -> bool {
        match self {
            CostFunction::Affine { .. } => true,
            CostFunction::Quadratic { c, .. } => *c >= 0.0,
            CostFunction::PiecewiseLinear { x, y } => {
                let s: Vec<f64> = (1..x.len()).map(|k| (y[k] - y[k - 1]) / (x[k] - x[k - 1])).collect();
                s.windows(2).all(|w| w[0] <= w[1])
            }
            CostFunction::AbsDeviation { weight, .. } => *weight >= 0.0,
            CostFunction::Polynomial { coeffs } => coeffs.len() <= 2 || coeffs.len() == 3 && coeffs[2] >= 0.0,
        }
    }

    /// Parameter problems, one message each.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            CostFunction::Affine { a, b } => {
                if !finite(&[*a, *b]) {
                    v.push("cost coefficients must be finite");
                }
            }
            CostFunction::Quadratic { a, b, c } => {
                if !finite(&[*a, *b, *c]) {
                    v.push("cost coefficients must be finite");
                }
            }
            CostFunction::PiecewiseLinear { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    v.push("piecewise-linear cost needs at least two (x, y) pairs of equal length");
                } else if !finite(x) || !finite(y) {
                    v.push("cost coefficients must be finite");
                } else if x.windows(2).any(|w| w[0] >= w[1]) {
                    v.push("piecewise-linear breakpoints must be strictly increasing");
                }
            }
            CostFunction::AbsDeviation { weight, reference } => {
                if !finite(&[*weight, *reference]) {
                    v.push("cost coefficients must be finite");
                }
            }
            CostFunction::Polynomial { coeffs } => {
                if !finite(coeffs) {
                    v.push("cost coefficients must be finite");
                }
            }
        }
        v
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CostFunction::Affine { a, b } => a + b * x,
            CostFunction::Quadratic { a, b, c } => a + b * x + c * x * x,
            CostFunction::PiecewiseLinear { x: xs, y } => {
                let k = segment(xs, x);
                let s = (y[k + 1] - y[k]) / (xs[k + 1] - xs[k]);
                y[k] + (x - xs[k]) * s
            }
            CostFunction::AbsDeviation { weight, reference } => weight * (x - reference).abs(),
            CostFunction::Polynomial { coeffs } => {
                let mut acc = 0.0;
                let mut p = 1.0;
                for c in coeffs {
                    acc += c * p;
                    p *= x;
                }
                acc
            }
        }
    }

    /// Certified lower bound of the cost over `cell`.
    pub fn lower_bound(&self, cell: Interval) -> Result<f64> {
        if !cell.is_finite() {
            return Err(Error::InvalidArgument("factor not lower-bounded: infinite cell".into()));
        }
        let m = cell.mag();
        let v = match self {
            CostFunction::Affine { a, b } => {
                let x = if *b >= 0.0 { cell.lo } else { cell.hi };
                guarded(self.eval(x), a.abs() + b.abs() * m)
            }
            CostFunction::Quadratic { a, b, c } => {
                let mut best = self.eval(cell.lo).min(self.eval(cell.hi));
                if *c > 0.0 {
                    let h = cell.clamp(-b / (2.0 * c));
                    best = best.min(self.eval(h));
                }
                guarded(best, a.abs() + b.abs() * m + c.abs() * m * m)
            }
            CostFunction::PiecewiseLinear { x, y } => {
                let mut best = self.eval(cell.lo).min(self.eval(cell.hi));
                for (k, &xk) in x.iter().enumerate() {
                    if cell.lo < xk && xk < cell.hi {
                        best = best.min(y[k]);
                    }
                }
                let ymax = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let xmax = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let smax = (1..x.len())
                    .map(|k| ((y[k] - y[k - 1]) / (x[k] - x[k - 1])).abs())
                    .fold(0.0f64, f64::max);
                guarded(best, ymax + smax * (m + xmax))
            }
            CostFunction::AbsDeviation { weight, reference } => {
                let d = cell.add_scalar(-reference);
                let dist = d.mig();
                if *weight >= 0.0 {
                    round::mul_down(*weight, dist)
                } else {
                    round::mul_down(*weight, d.mag())
                }
            }
            CostFunction::Polynomial { coeffs } => {
                let mut acc = Interval::point(0.0);
                let mut mag = 0.0;
                for (k, c) in coeffs.iter().enumerate() {
                    let pk = ipow(cell, k as u32);
                    acc = acc + pk.scale(*c);
                    mag += c.abs() * libm::pow(m, k as f64);
                }
                guarded(acc.lo, mag * (coeffs.len() as f64 + 1.0))
            }
        };
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument("factor not lower-bounded".into()));
        }
        Ok(v)
    }
}

/// Index of the segment `[xs[k], xs[k+1]]` used to evaluate `x` (end segments extend).
pub(crate) fn segment(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    match xs.iter().position(|&b| b > x) {
        None => n - 2,
        Some(0) => 0,
        Some(p) => (p - 1).min(n - 2),
    }
}

/// Exact range of `x^k` with outward rounding.
fn ipow(x: Interval, k: u32) -> Interval {
    if k == 0 {
        return Interval::point(1.0);
    }
    let mut r = x;
    for _ in 1..k {
        r = r * x;
    }
    if k % 2 == 0 {
        // product form may dip below zero when x straddles it
        let sq = {
            let mut s = Interval::new(x.mig(), x.mag());
            let base = s;
            for _ in 1..k {
                s = s * base;
            }
            s
        };
        Interval::new(sq.lo.max(0.0), sq.hi)
    } else {
        r
    }
}

/// Function attached to a cost factor or to a constraint node, over scalar arguments.
#[derive(Clone, Debug, PartialEq)]
pub enum FactorFn {
    /// One argument.
    Cost(CostFunction),
    /// Active loss of a line in rectangular voltages `(e_i, f_i, e_j, f_j)`:
    /// `r/(r^2+x^2) * |V_i - V_j|^2`.
    LineLoss { r: f64, x: f64 },
    /// Cost of the injected active power `C(e*ir + f*ii)` over `(e, f, ir, ii)`.
    InjectionPower(CostFunction),
    /// `weight * |sum coeffs*x - target|`
    AbsResidual { coeffs: Vec<f64>, target: f64, weight: f64 },
    /// `weight * (sum coeffs*x - target)^2`
    LinearSquare { coeffs: Vec<f64>, target: f64, weight: f64 },
}

impl FactorFn {
    pub fn arity(&self) -> Option<usize> {
        match self {
            FactorFn::Cost(_) => Some(1),
            FactorFn::LineLoss { .. } | FactorFn::InjectionPower(_) => Some(4),
            FactorFn::AbsResidual { coeffs, .. } | FactorFn::LinearSquare { coeffs, .. } => Some(coeffs.len()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FactorFn::Cost(_) => "cost",
            FactorFn::LineLoss { .. } => "line-loss",
            FactorFn::InjectionPower(_) => "injection-power",
            FactorFn::AbsResidual { .. } => "abs-residual",
            FactorFn::LinearSquare { .. } => "linear-square",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FactorFn::Cost(c) => c.eval(x[0]),
            FactorFn::LineLoss { r, x: xr } => {
                let g = r / (r * r + xr * xr);
                let de = x[0] - x[2];
                let df = x[1] - x[3];
                g * (de * de + df * df)
            }
            FactorFn::InjectionPower(c) => c.eval(x[0] * x[2] + x[1] * x[3]),
            FactorFn::AbsResidual { coeffs, target, weight } => weight * (linear(coeffs, x) - target).abs(),
            FactorFn::LinearSquare { coeffs, target, weight } => {
                let s = linear(coeffs, x) - target;
                weight * s * s
            }
        }
    }

    /// Certified lower bound over the box `b` (one interval per argument).
    pub fn lower_bound(&self, b: &[Interval]) -> Result<f64> {
        if b.iter().any(|i| !i.is_finite()) {
            return Err(Error::InvalidArgument("factor not lower-bounded: infinite cell".into()));
        }
        let v = match self {
            FactorFn::Cost(c) => return c.lower_bound(b[0]),
            FactorFn::LineLoss { r, x } => {
                let den = Interval::point(*r).sqr() + Interval::point(*x).sqr();
                let g = Interval::point(*r).div(&den).ok_or(Error::NonFinite("line impedance"))?;
                let s = (b[0] - b[2]).sqr() + (b[1] - b[3]).sqr();
                let e = g * s;
                guarded(e.lo, e.mag())
            }
            FactorFn::InjectionPower(c) => {
                let p = b[0] * b[2] + b[1] * b[3];
                return c.lower_bound(p);
            }
            FactorFn::AbsResidual { coeffs, target, weight } => {
                let s = linear_box(coeffs, b).add_scalar(-target);
                let w = Interval::point(*weight);
                let e = w * Interval::new(s.mig(), s.mag());
                guarded(e.lo, e.mag())
            }
            FactorFn::LinearSquare { coeffs, target, weight } => {
                let s = linear_box(coeffs, b).add_scalar(-target);
                let e = s.sqr().scale(*weight);
                guarded(e.lo, e.mag())
            }
        };
        if v.is_nan() {
            return Err(Error::InvalidArgument("factor not lower-bounded".into()));
        }
        Ok(v)
    }
}

fn linear(c: &[f64], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn linear_box(c: &[f64], b: &[Interval]) -> Interval {
    c.iter()
        .zip(b)
        .fold(Interval::point(0.0), |acc, (a, x)| acc + x.scale(*a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn square_on_two_cells() {
        let f = CostFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 };
        assert!(close(f.lower_bound(Interval::new(-1.0, 0.0)).unwrap(), 0.0));
        assert!(close(f.lower_bound(Interval::new(0.0, 1.0)).unwrap(), 0.0));
    }

    #[test]
    fn square_on_four_cells() {
        let f = CostFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 };
        let got: Vec<f64> = [(-1.0, -0.5), (-0.5, 0.0), (0.0, 0.5), (0.5, 1.0)]
            .iter()
            .map(|&(l, h)| f.lower_bound(Interval::new(l, h)).unwrap())
            .collect();
        for (g, e) in got.iter().zip([0.25, 0.0, 0.0, 0.25]) {
            assert!(close(*g, e), "{got:?}");
            assert!(*g <= e);
        }
    }

    #[test]
    fn shifted_square_vertex_on_boundary() {
        // (q-1)^2 = 1 - 2q + q^2
        let f = CostFunction::Quadratic { a: 1.0, b: -2.0, c: 1.0 };
        assert!(close(f.lower_bound(Interval::new(0.0, 1.0)).unwrap(), 0.0));
        assert!(close(f.lower_bound(Interval::new(1.0, 2.0)).unwrap(), 0.0));
    }

    #[test]
    fn piecewise_linear_uses_interior_breakpoints() {
        let f = CostFunction::PiecewiseLinear { x: alloc::vec![0.0, 1.0, 2.0], y: alloc::vec![1.0, -1.0, 3.0] };
        assert!(close(f.lower_bound(Interval::new(0.0, 2.0)).unwrap(), -1.0));
        assert!(close(f.eval(3.0), 7.0));
        assert!(f.is_convex());
    }

    #[test]
    fn abs_deviation_distance() {
        let f = CostFunction::AbsDeviation { weight: 2.0, reference: 3.0 };
        assert_eq!(f.lower_bound(Interval::new(0.0, 1.0)).unwrap(), 4.0);
        assert_eq!(f.lower_bound(Interval::new(2.0, 4.0)).unwrap(), 0.0);
    }

    fn sampled_min(f: &dyn Fn(f64) -> f64, cell: Interval, rng: &mut impl Rng) -> f64 {
        let mut best = f(cell.lo).min(f(cell.hi));
        for _ in 0..10_000 {
            best = best.min(f(rng.gen_range(cell.lo..=cell.hi)));
        }
        best
    }

    #[test]
    fn random_cubic_tables_stay_below_samples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let f = CostFunction::Polynomial { coeffs };
            let mut cuts: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                let cell = Interval::new(w[0], w[1]);
                let lb = f.lower_bound(cell).unwrap();
                assert!(lb <= sampled_min(&|x| f.eval(x), cell, &mut rng));
            }
        }
    }

    #[test]
    fn quadratic_tables_stay_below_samples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let f = CostFunction::Quadratic {
                a: rng.gen_range(-3.0..3.0),
                b: rng.gen_range(-3.0..3.0),
                c: rng.gen_range(-1.0..3.0),
            };
            let lo = rng.gen_range(-3.0..3.0);
            let cell = Interval::new(lo, lo + rng.gen_range(0.0..2.0));
            assert!(f.lower_bound(cell).unwrap() <= sampled_min(&|x| f.eval(x), cell, &mut rng));
        }
    }

    #[test]
    fn line_loss_lower_bound_is_sound() {
        let f = FactorFn::LineLoss { r: 0.1, x: 0.3 };
        let b = [
            Interval::new(0.9, 1.1),
            Interval::new(-0.1, 0.1),
            Interval::new(0.95, 1.0),
            Interval::new(-0.2, 0.0),
        ];
        let lb = f.lower_bound(&b).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..5000 {
            let p: Vec<f64> = b.iter().map(|i| rng.gen_range(i.lo..=i.hi)).collect();
            assert!(lb <= f.eval(&p));
        }
    }

    #[test]
    fn infinite_cell_is_not_lower_bounded() {
        let f = CostFunction::Affine { a: 0.0, b: 1.0 };
        assert!(f.lower_bound(Interval { lo: f64::NEG_INFINITY, hi: 0.0 }).is_err());
    }
}
