//! Certified checks of the standing hypotheses (contraction into the unit
//! square, domination, the rectangular open set condition) and empirical
//! estimates of the distortion constants.

mod distortion;
mod rosc;

pub use distortion::{distortion_diagnostics, DistortionReport};
pub use rosc::{check_rosc, check_rosc_with_budget, RoscStatus, RoscVerdict, RoscWitness};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::IfsSpec;
use crate::poly::{range_bounds, Interval, Poly2, Rect};

/// Range enclosure that falls back to the best valid bound when the
/// subdivision budget runs out; looser, but never wrong.
fn certified_range(p: &Poly2, rect: &Rect, tol: f64) -> Result<Interval> {
    match range_bounds(p, rect, tol) {
        Err(Error::SubdivisionBudget { best, .. }) => Ok(best),
        other => other,
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionBound {
    /// Upper bound on `sqrt(fx^2 + gx^2 + gy^2)` over the unit square.
    pub lipschitz: f64,
    pub f_range: Interval,
    pub g_range: Interval,
    pub self_map: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub maps: Vec<ContractionBound>,
    pub self_map: bool,
    pub c_bound: f64,
}

impl ContractionReport {
    pub fn pass(&self) -> bool {
        self.self_map && self.c_bound < 1.0
    }
}

/// Certifies each map as a contraction of the unit square into itself.
/// Images touching the boundary are accepted when the enclosure leaves the
/// square by at most `tol`, since enclosures of an attained endpoint such as
/// `f(0) = 0` are only tight to `tol`.
pub fn check_contraction(ifs: &IfsSpec, tol: f64) -> Result<ContractionReport> {
    check_tol(tol)?;
    let unit = Rect::unit();
    let mut maps = Vec::with_capacity(ifs.len());
    for m in ifs.maps() {
        let frob = m
            .fx()
            .mul(m.fx())
            .add(&m.gx().mul(m.gx()))
            .add(&m.gy().mul(m.gy()));
        let sq = certified_range(&frob, &unit, tol)?;
        let f_range = certified_range(m.f(), &unit, tol)?;
        let g_range = certified_range(m.g(), &unit, tol)?;
        let inside = |r: &Interval| r.lo() >= -tol && r.hi() <= 1.0 + tol;
        maps.push(ContractionBound {
            lipschitz: sq.hi().max(0.0).sqrt(),
            self_map: inside(&f_range) && inside(&g_range),
            f_range,
            g_range,
        });
    }
    Ok(ContractionReport {
        self_map: maps.iter().all(|b| b.self_map),
        c_bound: maps.iter().map(|b| b.lipschitz).fold(0.0, f64::max),
        maps,
    })
}

/// Certified bounds on one map's Jacobian entries over the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapBounds {
    pub inf_fx: f64,
    pub sup_fx: f64,
    pub inf_gy: f64,
    pub sup_gy: f64,
    pub inf_gx: f64,
    pub sup_gx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub maps: Vec<MapBounds>,
    pub d: f64,
    pub eta: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// `inf fx > sup gy` for every map and `d > 0`.
    pub pass: bool,
    /// As `pass` but allowing `inf fx = sup gy` up to `tol`: conformal
    /// systems such as similarities sit exactly on this boundary.
    pub weak_pass: bool,
}

/// Cells per side of the grid used to bound the per-letter singular values.
const ALPHA_GRID: usize = 32;

/// Largest singular value of `[[fx, 0], [gx, gy]]`. It depends only on the
/// absolute values of the entries and grows with each of them.
fn a1(fx: f64, gx: f64, gy: f64) -> f64 {
    0.5 * ((fx + gy).hypot(gx) + (fx - gy).hypot(gx))
}

pub fn check_domination(ifs: &IfsSpec, tol: f64) -> Result<DominationReport> {
    check_tol(tol)?;
    let unit = Rect::unit();
    let mut maps = Vec::with_capacity(ifs.len());
    for m in ifs.maps() {
        let fx = certified_range(m.fx(), &unit, tol)?;
        let gy = certified_range(m.gy(), &unit, tol)?;
        let gx = certified_range(m.gx(), &unit, tol)?;
        maps.push(MapBounds {
            inf_fx: fx.lo(),
            sup_fx: fx.hi(),
            inf_gy: gy.lo(),
            sup_gy: gy.hi(),
            inf_gx: gx.lo(),
            sup_gx: gx.hi(),
        });
    }
    let d = maps.iter().map(|b| b.inf_gy).fold(f64::INFINITY, f64::min);
    let eta = maps
        .iter()
        .map(|b| {
            if b.inf_fx > 0.0 {
                b.sup_gy / b.inf_fx
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let pass = d > 0.0 && maps.iter().all(|b| b.inf_fx > b.sup_gy);
    let weak_pass = d > 0.0 && maps.iter().all(|b| b.inf_fx + tol >= b.sup_gy);
    let (alpha_min, alpha_max) = alpha_bounds(ifs);
    let probs = ifs.probabilities();
    Ok(DominationReport {
        maps,
        d,
        eta,
        alpha_min,
        alpha_max,
        p_min: probs.iter().copied().fold(f64::INFINITY, f64::min),
        p_max: probs.iter().copied().fold(0.0, f64::max),
        pass,
        weak_pass,
    })
}

/// Lower bound on `inf alpha_2(DS_i)` and upper bound on `sup alpha_1(DS_i)`
/// over all letters and points, from entry enclosures on a grid of cells:
/// `alpha_1` is bounded by its value at the entrywise magnitudes and
/// `alpha_2 = det / alpha_1`. The lower bound is 0 when some diagonal entry
/// is not certified positive.
fn alpha_bounds(ifs: &IfsSpec) -> (f64, f64) {
    let h = 1.0 / ALPHA_GRID as f64;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for m in ifs.maps() {
        for i in 0..ALPHA_GRID {
            for j in 0..ALPHA_GRID {
                let cell = Rect::new(
                    Interval::new(i as f64 * h, (i + 1) as f64 * h),
                    Interval::new(j as f64 * h, (j + 1) as f64 * h),
                );
                let fx = m.fx().enclose(&cell);
                let gx = m.gx().enclose(&cell);
                let gy = m.gy().enclose(&cell);
                let top = a1(fx.mag(), gx.mag(), gy.mag());
                hi = hi.max(top);
                let det_lo = if fx.lo() > 0.0 && gy.lo() > 0.0 {
                    fx.lo() * gy.lo()
                } else {
                    0.0
                };
                lo = lo.min(det_lo / top);
            }
        }
    }
    // Leave room for rounding in the closed forms above.
    (lo * (1.0 - 1e-12), hi * (1.0 + 1e-12))
}

/// Rejects systems whose diagonal Jacobian entries are not certified
/// positive with `inf fx >= sup gy`; every estimator assumes this.
pub fn require_domination(ifs: &IfsSpec, tol: f64) -> Result<DominationReport> {
    let report = check_domination(ifs, tol)?;
    if report.weak_pass {
        Ok(report)
    } else {
        Err(Error::InvalidSystem(format!(
            "{} fails the domination condition (d = {}, eta = {})",
            ifs.label(),
            report.d,
            report.eta
        )))
    }
}
