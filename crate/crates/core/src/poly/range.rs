//! Rigorous range enclosures by interval evaluation and bisection.
//!
//! The lower and upper ends are refined independently. Each end keeps a heap
//! of live boxes keyed by their enclosure bound; the best box is split until
//! its bound is within `tol` of a value actually attained at a sampled point.
//! The heap minimum only ever moves inward, so the returned enclosure is
//! always valid and shrinks monotonically as `tol` decreases.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Axis, Interval, Poly2, Rect};
use crate::error::{Error, Result};

pub const DEFAULT_SUBDIVISION_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, Copy)]
pub struct RangeOptions {
    /// Maximum number of boxes created per end before giving up.
    pub budget: usize,
}

impl Default for RangeOptions {
    fn default() -> Self {
        RangeOptions {
            budget: DEFAULT_SUBDIVISION_BUDGET,
        }
    }
}

pub fn range_bounds(p: &Poly2, rect: &Rect, tol: f64) -> Result<Interval> {
    range_bounds_with(p, rect, tol, RangeOptions::default())
}

pub fn range_bounds_with(p: &Poly2, rect: &Rect, tol: f64, opts: RangeOptions) -> Result<Interval> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let natural = p.eval_interval(rect);
    let lo = refine(p, rect, tol, opts.budget, Side::Lower);
    let hi = refine(p, rect, tol, opts.budget, Side::Upper);
    match (lo, hi) {
        (Ok(lo), Ok(hi)) => Ok(Interval::new(lo, hi)),
        (lo, hi) => {
            let best = Interval::new(
                lo.unwrap_or_else(|b| b).max(natural.lo()),
                hi.unwrap_or_else(|b| b).min(natural.hi()),
            );
            Err(Error::SubdivisionBudget {
                limit: opts.budget,
                best,
            })
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Lower,
    Upper,
}

struct Node {
    // Enclosure bound, sign-flipped for the lower side so that the heap
    // (a max-heap) always surfaces the most extreme box.
    key: f64,
    seq: usize,
    rect: Rect,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Natural interval extension intersected with the mean-value form
/// `p(c) + p_x(R)(x - c_x) + p_y(R)(y - c_y)`. The latter overestimates by
/// O(width^2), which keeps the number of boxes near a flat interior
/// extremum small.
pub(super) fn enclose(p: &Poly2, px: &Poly2, py: &Poly2, r: &Rect) -> Interval {
    let natural = p.eval_interval(r);
    let (cx, cy) = r.center();
    let center = Rect::new(Interval::point(cx), Interval::point(cy));
    let mean_value = p.eval_interval(&center)
        + px.eval_interval(r) * (r.x - Interval::point(cx))
        + py.eval_interval(r) * (r.y - Interval::point(cy));
    natural.intersect(&mean_value).unwrap_or(natural)
}

/// Returns the refined bound, or the best valid bound reached when the
/// budget runs out.
fn refine(p: &Poly2, rect: &Rect, tol: f64, budget: usize, side: Side) -> Result<f64, f64> {
    let sign = match side {
        Side::Lower => -1.0,
        Side::Upper => 1.0,
    };
    let px = p.partial(Axis::X);
    let py = p.partial(Axis::Y);
    let bound = |r: &Rect| {
        let e = enclose(p, &px, &py, r);
        match side {
            Side::Lower => -e.lo(),
            Side::Upper => e.hi(),
        }
    };
    let splits_x = p.depends_on(Axis::X);
    let splits_y = p.depends_on(Axis::Y);

    // Best attained value, in the same sign convention as the keys.
    let mut attained = f64::NEG_INFINITY;
    for pt in [
        (rect.x.lo(), rect.y.lo()),
        (rect.x.hi(), rect.y.lo()),
        (rect.x.lo(), rect.y.hi()),
        (rect.x.hi(), rect.y.hi()),
        rect.center(),
    ] {
        attained = attained.max(sign * p.eval(pt));
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        key: bound(rect),
        seq,
        rect: *rect,
    });

    loop {
        let top = heap.pop().expect("heap never empties");
        if top.key - attained <= tol {
            return Ok(sign * top.key);
        }
        if seq >= budget {
            return Err(sign * top.key);
        }
        let r = top.rect;
        let split_x = splits_x && (!splits_y || r.x.width() >= r.y.width());
        let children = if split_x {
            let (a, b) = r.x.split();
            [Rect::new(a, r.y), Rect::new(b, r.y)]
        } else {
            let (a, b) = r.y.split();
            [Rect::new(r.x, a), Rect::new(r.x, b)]
        };
        for child in children {
            seq += 1;
            attained = attained.max(sign * p.eval(child.center()));
            // Children are subsets of the parent, so their bound never
            // exceeds it; clamp to guard against rounding asymmetry.
            let key = bound(&child).min(top.key);
            heap.push(Node {
                key,
                seq,
                rect: child,
            });
        }
    }
}
