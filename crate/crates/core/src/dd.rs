//! Minimal double-double arithmetic for action sums.
//!
//! Barrier values are differences of actions whose summands are `O(1)`; the
//! configurations themselves only need double precision (the action is
//! stationary there), but the sums are accumulated in `hi + lo` form so that
//! differences far below `1e-16` stay resolvable.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const PI: Dd = Dd {
    hi: std::f64::consts::PI,
    lo: 1.2246467991473532e-16,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact difference of two doubles.
    pub fn diff(a: f64, b: f64) -> Self {
        let (s, e) = two_sum(a, -b);
        Dd { hi: s, lo: e }
    }

    pub fn scale(self, k: f64) -> Self {
        let (p, e) = two_prod(self.hi, k);
        let (hi, lo) = quick_two_sum(p, e + self.lo * k);
        Dd { hi, lo }
    }

    pub fn div_f64(self, k: f64) -> Self {
        let q1 = self.hi / k;
        let r = self - Dd::new(q1).scale(k);
        let q2 = r.hi / k;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn square(self) -> Self {
        self * self
    }

    /// `sin(π r)` for `|r| <= 1/2`, by Taylor series.
    fn sin_pi_reduced(r: f64) -> Self {
        let theta = PI.scale(r);
        let t2 = theta.square();
        let mut term = theta;
        let mut acc = theta;
        let mut k = 1.0;
        for _ in 0..30 {
            term = (term * t2).div_f64(-((k + 1.0) * (k + 2.0)));
            k += 2.0;
            acc = acc + term;
            if term.hi.abs() < 1e-34 * acc.hi.abs().max(1e-300) {
                break;
            }
        }
        acc
    }

    /// `1 - cos(2πx) = 2 sin²(πx)`, accurate to double-double precision.
    pub fn one_minus_cos_2pi(x: f64) -> Self {
        let r = x - x.round();
        Self::sin_pi_reduced(r).square().scale(2.0)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}
