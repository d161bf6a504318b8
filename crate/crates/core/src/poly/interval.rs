//! Closed intervals with outward-rounded arithmetic.
//!
//! Every operation returns an interval that contains the exact real result
//! for all inputs drawn from the operands. Rounding is directed only when
//! the floating-point result is inexact, detected with error-free
//! transformations, so exactly representable computations stay tight.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

/// Sum with the rounding error of `a + b`; the exact sum is `s + err`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn add_down(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if err < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
fn add_up(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let err = a.mul_add(b, -p);
    // Subnormal products make the fma residual unreliable; round anyway.
    if err < 0.0 || (p != 0.0 && p.abs() < f64::MIN_POSITIVE) {
        p.next_down()
    } else {
        p
    }
}

#[inline]
fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let err = a.mul_add(b, -p);
    if err > 0.0 || (p != 0.0 && p.abs() < f64::MIN_POSITIVE) {
        p.next_up()
    } else {
        p
    }
}

impl Interval {
    /// Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn try_new(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Interval::new(x, x)
    }

    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn split(&self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    /// Largest absolute value attained.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value attained.
    pub fn mig(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn abs(&self) -> Interval {
        Interval::new(self.mig(), self.mag())
    }

    pub fn sqr(&self) -> Interval {
        let a = self.mig();
        let b = self.mag();
        Interval::new(mul_down(a, a), mul_up(b, b))
    }

    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => *self,
            _ if n.is_multiple_of(2) => self.sqr().powi(n / 2),
            _ => *self * self.powi(n - 1),
        }
    }

    /// Monotone square root of a non-negative interval.
    pub fn sqrt(&self) -> Interval {
        let lo = self.lo.max(0.0).sqrt();
        let hi = self.hi.max(0.0).sqrt();
        // sqrt is correctly rounded, so one ulp outward is enough.
        Interval::new(if lo > 0.0 { lo.next_down() } else { 0.0 }, hi.next_up())
    }

    pub fn scale(&self, c: f64) -> Interval {
        Interval::point(c) * *self
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(mul_down(a, b));
            hi = hi.max(mul_up(a, b));
        }
        Interval::new(lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// An axis-aligned box in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: Interval,
    pub y: Interval,
}

impl Rect {
    pub fn new(x: Interval, y: Interval) -> Self {
        Rect { x, y }
    }

    pub fn unit() -> Self {
        Rect::new(Interval::UNIT, Interval::UNIT)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x.mid(), self.y.mid())
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.x.contains(p.0) && self.y.contains(p.1)
    }

    pub fn quarters(&self) -> [Rect; 4] {
        let (x0, x1) = self.x.split();
        let (y0, y1) = self.y.split();
        [
            Rect::new(x0, y0),
            Rect::new(x1, y0),
            Rect::new(x0, y1),
            Rect::new(x1, y1),
        ]
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        Some(Rect::new(
            self.x.intersect(&other.x)?,
            self.y.intersect(&other.y)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_operations_stay_tight() {
        let a = Interval::new(0.5, 1.0);
        let b = Interval::new(0.25, 2.0);
        assert_eq!(a + b, Interval::new(0.75, 3.0));
        assert_eq!(a * b, Interval::new(0.125, 2.0));
    }

    #[test]
    fn inexact_sum_is_widened() {
        let s = Interval::point(0.1) + Interval::point(0.2);
        assert!(s.lo() < s.hi());
        assert!(s.contains(0.30000000000000004) || s.contains(0.3));
    }

    #[test]
    fn even_power_of_straddling_interval() {
        let x = Interval::new(-2.0, 1.0);
        assert_eq!(x.powi(2), Interval::new(0.0, 4.0));
        let cube = x.powi(3);
        assert!(cube.contains(-8.0) && cube.contains(1.0));
    }

    #[test]
    fn mul_with_signs() {
        let a = Interval::new(-1.0, 2.0);
        let b = Interval::new(-3.0, 0.5);
        assert_eq!(a * b, Interval::new(-6.0, 3.0));
    }
}
