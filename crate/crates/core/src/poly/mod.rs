//! Bivariate polynomials with real coefficients.
//!
//! The component maps of every system are stored as [`Poly2`] values. Besides
//! point evaluation and formal differentiation, a polynomial can be evaluated
//! over a [`Rect`] with interval arithmetic, and [`range_bounds`] refines that
//! natural enclosure by bisection until it is within a tolerance of the true
//! range.

mod interval;
mod range;

use std::fmt;

pub use interval::{Interval, Rect};
pub use range::{range_bounds, range_bounds_with, RangeOptions, DEFAULT_SUBDIVISION_BUDGET};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// One monomial `coeff * x^deg_x * y^deg_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub deg_x: u32,
    pub deg_y: u32,
    pub coeff: f64,
}

impl Term {
    pub fn new(deg_x: u32, deg_y: u32, coeff: f64) -> Self {
        Term {
            deg_x,
            deg_y,
            coeff,
        }
    }
}

/// A polynomial in `x` and `y`.
///
/// Terms are kept sorted by `(deg_x, deg_y)` with one entry per exponent pair
/// and no zero coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly2 {
    terms: Vec<Term>,
}

impl Poly2 {
    /// Builds a polynomial, merging terms that share an exponent pair.
    pub fn new(terms: impl IntoIterator<Item = Term>) -> Self {
        let mut terms: Vec<Term> = terms.into_iter().collect();
        terms.sort_by_key(|t| (t.deg_x, t.deg_y));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.deg_x == t.deg_x && last.deg_y == t.deg_y => {
                    last.coeff += t.coeff
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        Poly2 { terms: merged }
    }

    /// Convenience constructor from `(deg_x, deg_y, coeff)` triples.
    pub fn from_triples(triples: &[(u32, u32, f64)]) -> Self {
        Poly2::new(triples.iter().map(|&(dx, dy, c)| Term::new(dx, dy, c)))
    }

    /// Univariate polynomial in `x` from `(deg, coeff)` pairs.
    pub fn univariate(pairs: &[(u32, f64)]) -> Self {
        Poly2::new(pairs.iter().map(|&(d, c)| Term::new(d, 0, c)))
    }

    pub fn zero() -> Self {
        Poly2::default()
    }

    pub fn constant(c: f64) -> Self {
        Poly2::new([Term::new(0, 0, c)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn depends_on(&self, axis: Axis) -> bool {
        self.terms.iter().any(|t| match axis {
            Axis::X => t.deg_x > 0,
            Axis::Y => t.deg_y > 0,
        })
    }

    /// Affine in `x` alone: returns `(slope, intercept)`.
    pub fn as_affine_x(&self) -> Option<(f64, f64)> {
        let mut slope = 0.0;
        let mut intercept = 0.0;
        for t in &self.terms {
            match (t.deg_x, t.deg_y) {
                (0, 0) => intercept = t.coeff,
                (1, 0) => slope = t.coeff,
                _ => return None,
            }
        }
        Some((slope, intercept))
    }

    pub fn eval(&self, (x, y): (f64, f64)) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * x.powi(t.deg_x as i32) * y.powi(t.deg_y as i32))
            .sum()
    }

    /// Evaluation of a polynomial that ignores `y`.
    pub fn eval_x(&self, x: f64) -> f64 {
        self.eval((x, 0.0))
    }

    pub fn partial(&self, axis: Axis) -> Poly2 {
        Poly2::new(self.terms.iter().filter_map(|t| match axis {
            Axis::X if t.deg_x > 0 => {
                Some(Term::new(t.deg_x - 1, t.deg_y, t.coeff * t.deg_x as f64))
            }
            Axis::Y if t.deg_y > 0 => {
                Some(Term::new(t.deg_x, t.deg_y - 1, t.coeff * t.deg_y as f64))
            }
            _ => None,
        }))
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        Poly2::new(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        Poly2::new(self.terms.iter().flat_map(|a| {
            other
                .terms
                .iter()
                .map(move |b| Term::new(a.deg_x + b.deg_x, a.deg_y + b.deg_y, a.coeff * b.coeff))
        }))
    }

    /// One-shot enclosure over `rect`: the natural extension intersected
    /// with the mean-value form. Tighter than `eval_interval` on small boxes.
    pub fn enclose(&self, rect: &Rect) -> Interval {
        range::enclose(self, &self.partial(Axis::X), &self.partial(Axis::Y), rect)
    }

    /// Natural interval extension over `rect`.
    pub fn eval_interval(&self, rect: &Rect) -> Interval {
        let mut acc: Option<Interval> = None;
        for t in &self.terms {
            let mut v = Interval::point(t.coeff);
            if t.deg_x > 0 {
                v = v * rect.x.powi(t.deg_x);
            }
            if t.deg_y > 0 {
                v = v * rect.y.powi(t.deg_y);
            }
            acc = Some(match acc {
                Some(a) => a + v,
                None => v,
            });
        }
        acc.unwrap_or(Interval::point(0.0))
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coeff)?;
            match t.deg_x {
                0 => {}
                1 => write!(f, "*x")?,
                d => write!(f, "*x^{d}")?,
            }
            match t.deg_y {
                0 => {}
                1 => write!(f, "*y")?,
                d => write!(f, "*y^{d}")?,
            }
        }
        Ok(())
    }
}

/// Parses a coefficient written either as a decimal number or as an exact
/// rational `"a/b"`, returning the nearest double.
pub fn parse_coefficient(text: &str) -> Result<f64> {
    let text = text.trim();
    let bad = || Error::InvalidArgument(format!("malformed coefficient {text:?}"));
    let value = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            num / den
        }
        None => text.parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}
