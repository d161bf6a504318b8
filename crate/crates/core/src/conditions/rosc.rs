//! Rectangular open set condition: the images of the open unit square are
//! pairwise disjoint.
//!
//! For each pair of maps the two domains are subdivided in lockstep and the
//! image of every sub-box is enclosed by interval evaluation of `f` and `g`.
//! A pair of sub-boxes is settled when their image enclosures are disjoint
//! or meet only in a sliver thinner than `tol` (boundary contact). Overlaps
//! are probed for a genuine common interior point by inverting both maps at
//! the centre of the overlap; the rest are refined until `max_depth`.

use serde::Serialize;

use crate::ifs::{invert_map, IfsSpec, MapSpec};
use crate::poly::Rect;

/// Sub-box pairs examined before a check gives up as inconclusive.
pub const DEFAULT_ROSC_BUDGET: usize = 1 << 22;

/// Preimage precision used when probing a common interior point.
const INVERT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RoscStatus {
    Verified,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoscWitness {
    pub maps: (usize, usize),
    /// A point in the open image of both maps.
    pub point: (f64, f64),
    /// Its preimages under the two maps, both in the open unit square.
    pub preimages: ((f64, f64), (f64, f64)),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoscVerdict {
    pub status: RoscStatus,
    pub witness: Option<RoscWitness>,
    pub max_depth: usize,
    /// Sub-box pairs examined.
    pub nodes: usize,
    /// Overlapping sub-box pairs left at `max_depth`.
    pub unresolved: usize,
}

fn image_enclosure(m: &MapSpec, domain: &Rect) -> Rect {
    Rect::new(m.f().enclose(domain), m.g().enclose(domain))
}

pub fn check_rosc(ifs: &IfsSpec, max_depth: usize, tol: f64) -> RoscVerdict {
    check_rosc_with_budget(ifs, max_depth, tol, DEFAULT_ROSC_BUDGET)
}

/// Assumes the system is dominated, so that each map is invertible on its
/// image by monotone bisection.
pub fn check_rosc_with_budget(
    ifs: &IfsSpec,
    max_depth: usize,
    tol: f64,
    budget: usize,
) -> RoscVerdict {
    let mut nodes = 0usize;
    let mut unresolved = 0usize;
    let maps = ifs.maps();
    for a in 0..maps.len() {
        for b in a + 1..maps.len() {
            let mut stack = vec![(Rect::unit(), Rect::unit(), 0usize)];
            while let Some((da, db, depth)) = stack.pop() {
                nodes += 1;
                if nodes > budget {
                    return RoscVerdict {
                        status: RoscStatus::Inconclusive,
                        witness: None,
                        max_depth,
                        nodes: budget,
                        unresolved: unresolved + stack.len() + 1,
                    };
                }
                let ea = image_enclosure(&maps[a], &da);
                let eb = image_enclosure(&maps[b], &db);
                let Some(overlap) = ea.intersect(&eb) else {
                    continue;
                };
                if overlap.x.width() <= tol || overlap.y.width() <= tol {
                    continue;
                }
                let c = overlap.center();
                if let (Some(pa), Some(pb)) = (
                    invert_map(ifs, a, c, INVERT_TOL),
                    invert_map(ifs, b, c, INVERT_TOL),
                ) {
                    return RoscVerdict {
                        status: RoscStatus::Violated,
                        witness: Some(RoscWitness {
                            maps: (a, b),
                            point: c,
                            preimages: (pa, pb),
                        }),
                        max_depth,
                        nodes,
                        unresolved,
                    };
                }
                if depth >= max_depth {
                    unresolved += 1;
                    continue;
                }
                let (qa, qb) = (da.quarters(), db.quarters());
                for ca in qa.iter().rev() {
                    for cb in qb.iter().rev() {
                        stack.push((*ca, *cb, depth + 1));
                    }
                }
            }
        }
    }
    RoscVerdict {
        status: if unresolved == 0 {
            RoscStatus::Verified
        } else {
            RoscStatus::Inconclusive
        },
        witness: None,
        max_depth,
        nodes,
        unresolved,
    }
}
