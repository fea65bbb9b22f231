//! Closed intervals with outward rounding.
//!
//! Every operation returns an interval that contains the exact real result for all
//! points of the operands. Rounding is directed per endpoint with error-free
//! transforms, so results that are exactly representable stay exact.

use core::ops::{Add, Mul, Neg, Sub};

/// Round-to-neighbour helpers. `*_down` never exceeds the exact result, `*_up`
/// never falls below it.
pub mod round {
    #[inline]
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    #[inline]
    pub fn add_down(a: f64, b: f64) -> f64 {
        let (s, e) = two_sum(a, b);
        if s.is_finite() && e < 0.0 {
            s.next_down()
        } else {
            s
        }
    }

    #[inline]
    pub fn add_up(a: f64, b: f64) -> f64 {
        let (s, e) = two_sum(a, b);
        if s.is_finite() && e > 0.0 {
            s.next_up()
        } else {
            s
        }
    }

    #[inline]
    pub fn sub_down(a: f64, b: f64) -> f64 {
        add_down(a, -b)
    }

    #[inline]
    pub fn sub_up(a: f64, b: f64) -> f64 {
        add_up(a, -b)
    }

    #[inline]
    pub fn mul_down(a: f64, b: f64) -> f64 {
        let p = a * b;
        if !p.is_finite() || p == 0.0 && (a == 0.0 || b == 0.0) {
            return p;
        }
        if libm::fma(a, b, -p) < 0.0 {
            p.next_down()
        } else {
            p
        }
    }

    #[inline]
    pub fn mul_up(a: f64, b: f64) -> f64 {
        let p = a * b;
        if !p.is_finite() || p == 0.0 && (a == 0.0 || b == 0.0) {
            return p;
        }
        if libm::fma(a, b, -p) > 0.0 {
            p.next_up()
        } else {
            p
        }
    }

    /// Sign of `a/b - q` for the rounded quotient `q`.
    #[inline]
    fn div_err_sign(a: f64, b: f64, q: f64) -> f64 {
        let r = libm::fma(-q, b, a);
        if r == 0.0 {
            0.0
        } else if (r > 0.0) == (b > 0.0) {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn div_down(a: f64, b: f64) -> f64 {
        let q = a / b;
        if !q.is_finite() {
            return q;
        }
        if div_err_sign(a, b, q) < 0.0 {
            q.next_down()
        } else {
            q
        }
    }

    #[inline]
    pub fn div_up(a: f64, b: f64) -> f64 {
        let q = a / b;
        if !q.is_finite() {
            return q;
        }
        if div_err_sign(a, b, q) > 0.0 {
            q.next_up()
        } else {
            q
        }
    }

    /// Square root of a nonnegative number rounded down (negatives clamp to 0).
    #[inline]
    pub fn sqrt_down(x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s = libm::sqrt(x);
        if libm::fma(s, s, -x) > 0.0 {
            s.next_down()
        } else {
            s
        }
    }

    #[inline]
    pub fn sqrt_up(x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s = libm::sqrt(x);
        if libm::fma(s, s, -x) < 0.0 {
            s.next_up()
        } else {
            s
        }
    }

    /// `x^p` for `x >= 0` with a two-ulp guard; `pow` is not correctly rounded.
    pub fn pow_down(x: f64, p: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if p == 1.0 {
            return x;
        }
        if p == 2.0 {
            return mul_down(x, x);
        }
        if p == 0.5 {
            return sqrt_down(x);
        }
        let v = libm::pow(x, p);
        if v == 0.0 {
            0.0
        } else {
            v.next_down().next_down().max(0.0)
        }
    }

    pub fn pow_up(x: f64, p: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if p == 1.0 {
            return x;
        }
        if p == 2.0 {
            return mul_up(x, x);
        }
        if p == 0.5 {
            return sqrt_up(x);
        }
        libm::pow(x, p).next_up().next_up()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Panics in debug builds if `lo > hi` or either end is NaN.
    #[inline]
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is empty");
        Interval { lo, hi }
    }

    /// `None` when `lo > hi` or an end is NaN.
    #[inline]
    pub fn try_new(lo: f64, hi: f64) -> Option<Self> {
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    #[inline]
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + 0.5 * (self.hi - self.lo)
        }
    }

    #[inline]
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    #[inline]
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    #[inline]
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    #[inline]
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Distance from `x` to the interval (0 inside).
    #[inline]
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Largest absolute value in the interval.
    #[inline]
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    #[inline]
    pub fn mig(&self) -> f64 {
        if self.lo <= 0.0 && 0.0 <= self.hi {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn scale(&self, c: f64) -> Interval {
        let a = round::mul_down(self.lo, c).min(round::mul_down(self.hi, c));
        let b = round::mul_up(self.lo, c).max(round::mul_up(self.hi, c));
        Interval::new(a, b)
    }

    pub fn add_scalar(&self, c: f64) -> Interval {
        Interval::new(round::add_down(self.lo, c), round::add_up(self.hi, c))
    }

    /// Exact range of `x^2`.
    pub fn sqr(&self) -> Interval {
        let m = self.mig();
        let big = self.mag();
        Interval::new(round::mul_down(m, m), round::mul_up(big, big))
    }

    /// Division by an interval that excludes zero; `None` otherwise.
    pub fn div(&self, d: &Interval) -> Option<Interval> {
        if d.lo <= 0.0 && 0.0 <= d.hi {
            return None;
        }
        let cands_lo = [
            round::div_down(self.lo, d.lo),
            round::div_down(self.lo, d.hi),
            round::div_down(self.hi, d.lo),
            round::div_down(self.hi, d.hi),
        ];
        let cands_hi = [
            round::div_up(self.lo, d.lo),
            round::div_up(self.lo, d.hi),
            round::div_up(self.hi, d.lo),
            round::div_up(self.hi, d.hi),
        ];
        let lo = cands_lo.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands_hi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Interval::new(lo, hi))
    }

    /// Outer bisection into two closed halves sharing the midpoint.
    pub fn bisect(&self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, o: Interval) -> Interval {
        Interval::new(round::add_down(self.lo, o.lo), round::add_up(self.hi, o.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, o: Interval) -> Interval {
        Interval::new(round::sub_down(self.lo, o.hi), round::sub_up(self.hi, o.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let (a, b, c, d) = (self.lo, self.hi, o.lo, o.hi);
        let lo = round::mul_down(a, c)
            .min(round::mul_down(a, d))
            .min(round::mul_down(b, c))
            .min(round::mul_down(b, d));
        let hi = round::mul_up(a, c)
            .max(round::mul_up(a, d))
            .max(round::mul_up(b, c))
            .max(round::mul_up(b, d));
        Interval::new(lo, hi)
    }
}

impl core::fmt::Display for Interval {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
