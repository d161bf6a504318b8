//! The horizontal projection of the measure: a one-dimensional system of
//! increasing maps `f_i` with the same weights, and its L^q spectrum `beta`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::IfsSpec;
use crate::numeric::fit_line;
use crate::poly::{Axis, Poly2};

/// Words visited per projected stopping before giving up.
pub const DEFAULT_PROJECTION_BUDGET: usize = 1 << 28;

#[derive(Debug, Clone)]
pub struct Projected1D {
    fs: Vec<Poly2>,
    dfs: Vec<Poly2>,
    probs: Vec<f64>,
}

impl Projected1D {
    pub fn fs(&self) -> &[Poly2] {
        &self.fs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fs.is_empty()
    }
}

pub fn project(ifs: &IfsSpec) -> Projected1D {
    let fs: Vec<Poly2> = ifs.maps().iter().map(|m| m.f().clone()).collect();
    let dfs = fs.iter().map(|f| f.partial(Axis::X)).collect();
    Projected1D {
        fs,
        dfs,
        probs: ifs.probabilities(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaPoint {
    pub q: f64,
    pub beta: f64,
    pub fit_r2: f64,
    /// Coarsest and finest mesh used; NaN for closed-form values.
    pub delta_range: (f64, f64),
}

pub(crate) fn validate_deltas(deltas: &[f64], min_len: usize) -> Result<()> {
    if deltas.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} mesh sizes, got {}",
            deltas.len()
        )));
    }
    if let Some(&d) = deltas.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::EmptyStopping { delta: d });
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "mesh sizes must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Mass per half-open cell `[j δ, (j+1) δ)` for every `δ` in `deltas`, from
/// one walk over the 1-D stopping tree: a word stops at `δ` once
/// `|f_w'(z0)| < δ`, and its mass `p(w)` sits at `f_w(z0)`.
fn projected_cell_masses(
    proj: &Projected1D,
    deltas: &[f64],
    z0: f64,
    budget: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut cells: Vec<Vec<f64>> = deltas
        .iter()
        .map(|d| vec![0.0; (1.0 / d).ceil() as usize])
        .collect();
    let finest = *deltas.last().expect("validated non-empty");
    let mut letters: Vec<usize> = Vec::new();
    let mut visited = 0usize;

    // Explicit stack of (depth, letter, parent derivative, parent mass).
    let mut stack: Vec<(usize, usize, f64, f64)> = Vec::new();
    for i in (0..proj.len()).rev() {
        stack.push((0, i, 1.0, 1.0));
    }
    while let Some((depth, letter, parent_d, parent_m)) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(Error::EnumerationBudget {
                limit: budget,
                context: format!("projected stopping at delta = {finest}"),
            });
        }
        letters.truncate(depth);
        letters.push(letter);
        let mut x = z0;
        let mut deriv = 1.0;
        for &i in letters.iter().rev() {
            deriv *= proj.dfs[i].eval_x(x);
            x = proj.fs[i].eval_x(x);
        }
        let deriv = deriv.abs();
        let mass = parent_m * proj.probs[letter];
        for (k, &d) in deltas.iter().enumerate() {
            if deriv < d && d <= parent_d {
                let bins = &mut cells[k];
                let j = ((x / d).floor().max(0.0) as usize).min(bins.len() - 1);
                bins[j] += mass;
            }
        }
        if deriv >= finest {
            for i in (0..proj.len()).rev() {
                stack.push((depth + 1, i, deriv, mass));
            }
        }
    }
    Ok(cells)
}

fn moment(cells: &[f64], q: f64) -> f64 {
    cells.iter().filter(|&&m| m > 0.0).map(|&m| m.powf(q)).sum()
}

/// `beta(q)` for each `q`, sharing one stopping walk.
pub fn beta_empirical_curve(
    proj: &Projected1D,
    qs: &[f64],
    deltas: &[f64],
    z0: f64,
) -> Result<Vec<BetaPoint>> {
    if let Some(q) = qs.iter().find(|q| !(**q >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "q must be non-negative, got {q}"
        )));
    }
    if !(0.0..=1.0).contains(&z0) {
        return Err(Error::InvalidArgument(format!("z0 = {z0} outside [0, 1]")));
    }
    validate_deltas(deltas, 2)?;
    let cells = projected_cell_masses(proj, deltas, z0, DEFAULT_PROJECTION_BUDGET)?;
    qs.iter()
        .map(|&q| {
            let pts: Vec<(f64, f64)> = deltas
                .iter()
                .zip(&cells)
                .map(|(d, c)| (-d.ln(), moment(c, q).ln()))
                .collect();
            let fit = fit_line(&pts).expect("at least two distinct mesh sizes");
            Ok(BetaPoint {
                q,
                beta: fit.slope,
                fit_r2: fit.r2,
                delta_range: (deltas[0], *deltas.last().unwrap()),
            })
        })
        .collect()
}

pub fn beta_empirical(proj: &Projected1D, q: f64, deltas: &[f64], z0: f64) -> Result<BetaPoint> {
    Ok(beta_empirical_curve(proj, &[q], deltas, z0)?[0])
}

/// Total mass per mesh size; 1 up to rounding when the stopping is complete.
pub fn projected_mass(proj: &Projected1D, deltas: &[f64], z0: f64) -> Result<Vec<f64>> {
    validate_deltas(deltas, 1)?;
    let cells = projected_cell_masses(proj, deltas, z0, DEFAULT_PROJECTION_BUDGET)?;
    Ok(cells.iter().map(|c| c.iter().sum()).collect())
}

/// The projected measure on `2^bits` equal bins of `[0, 1]`, as the
/// stationary law of the chain `x -> f_i(x)` (chosen with probability
/// `p_i`) with every image snapped to its bin centre. Snapping moves each
/// step by at most half a bin and the maps contract, so this law couples
/// with the true projection within `h / (2 (1 - c))` where `h` is the bin
/// width and `c` the largest slope.
#[derive(Debug, Clone)]
pub struct ProjectedHistogram {
    bits: u32,
    mass: Vec<f64>,
    iterations: usize,
}

/// Histogram resolution used when none is given.
pub const DEFAULT_HISTOGRAM_BITS: u32 = 18;
const HISTOGRAM_TOL: f64 = 1e-13;
const HISTOGRAM_MAX_ITER: usize = 5000;

impl ProjectedHistogram {
    pub fn build(proj: &Projected1D, bits: u32) -> Result<Self> {
        if !(4..=26).contains(&bits) {
            return Err(Error::InvalidArgument(format!(
                "histogram resolution 2^-{bits} outside 2^-4 ..= 2^-26"
            )));
        }
        let n = 1usize << bits;
        let h = 1.0 / n as f64;
        let bin = |x: f64| ((x / h).floor().max(0.0) as usize).min(n - 1);
        let targets: Vec<Vec<u32>> = proj
            .fs
            .iter()
            .map(|f| {
                (0..n)
                    .map(|b| bin(f.eval_x((b as f64 + 0.5) * h)) as u32)
                    .collect()
            })
            .collect();
        let mut mass = vec![h; n];
        let mut next = vec![0.0; n];
        let mut iterations = 0;
        loop {
            next.iter_mut().for_each(|m| *m = 0.0);
            for (t, &p) in targets.iter().zip(&proj.probs) {
                for (b, &m) in mass.iter().enumerate() {
                    if m > 0.0 {
                        next[t[b] as usize] += p * m;
                    }
                }
            }
            iterations += 1;
            let change: f64 = mass.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut mass, &mut next);
            if change < HISTOGRAM_TOL {
                break;
            }
            if iterations >= HISTOGRAM_MAX_ITER {
                return Err(Error::InvalidArgument(format!(
                    "projected histogram did not settle after {iterations} sweeps (last change {change:e})"
                )));
            }
        }
        Ok(ProjectedHistogram {
            bits,
            mass,
            iterations,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.mass.len() as f64
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Masses on `2^level` bins, summed from the finest level.
    pub fn coarsened(&self, level: u32) -> Vec<f64> {
        let level = level.min(self.bits);
        let group = 1usize << (self.bits - level);
        self.mass.chunks(group).map(|c| c.iter().sum()).collect()
    }

    /// Masses of the half-open cells `[j δ, (j+1) δ)`, assigning each bin by
    /// its centre.
    pub fn cell_masses(&self, delta: f64) -> Vec<f64> {
        let n = (1.0 / delta).ceil() as usize;
        let h = self.bin_width();
        let mut cells = vec![0.0; n];
        for (b, &m) in self.mass.iter().enumerate() {
            let j = ((((b as f64) + 0.5) * h / delta).floor() as usize).min(n - 1);
            cells[j] += m;
        }
        cells
    }
}

/// `beta(q)` from mesh moments of the projected histogram.
pub fn beta_histogram_curve(
    hist: &ProjectedHistogram,
    qs: &[f64],
    deltas: &[f64],
) -> Result<Vec<BetaPoint>> {
    if let Some(q) = qs.iter().find(|q| !(**q >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "q must be non-negative, got {q}"
        )));
    }
    validate_deltas(deltas, 2)?;
    if *deltas.last().unwrap() < 4.0 * hist.bin_width() {
        return Err(Error::InvalidArgument(format!(
            "finest mesh {} is not coarser than four histogram bins",
            deltas.last().unwrap()
        )));
    }
    let cells: Vec<Vec<f64>> = deltas.iter().map(|&d| hist.cell_masses(d)).collect();
    Ok(qs
        .iter()
        .map(|&q| {
            let pts: Vec<(f64, f64)> = deltas
                .iter()
                .zip(&cells)
                .map(|(d, c)| (-d.ln(), moment(c, q).ln()))
                .collect();
            let fit = fit_line(&pts).expect("at least two distinct mesh sizes");
            BetaPoint {
                q,
                beta: fit.slope,
                fit_r2: fit.r2,
                delta_range: (deltas[0], *deltas.last().unwrap()),
            }
        })
        .collect())
}

/// Affine maps `a x + t` merged into distinct columns with summed weights,
/// or `None` if some map is not affine or two distinct columns overlap.
fn affine_columns(proj: &Projected1D) -> Option<Vec<(f64, f64, f64)>> {
    const SAME: f64 = 1e-12;
    let mut cols: Vec<(f64, f64, f64)> = Vec::new();
    for (f, &p) in proj.fs.iter().zip(&proj.probs) {
        let (a, t) = f.as_affine_x()?;
        if !(a > 0.0 && a < 1.0) {
            return None;
        }
        match cols
            .iter_mut()
            .find(|c| (c.0 - a).abs() <= SAME && (c.1 - t).abs() <= SAME)
        {
            Some(c) => c.2 += p,
            None => cols.push((a, t, p)),
        }
    }
    cols.sort_by(|u, v| u.1.total_cmp(&v.1));
    let disjoint = cols.windows(2).all(|w| w[0].1 + w[0].0 <= w[1].1 + SAME);
    disjoint.then_some(cols)
}

/// Root of `sum pi_j^q a_j^beta = 1` for affine, column-separated
/// projections.
pub fn beta_closed_form(proj: &Projected1D, q: f64) -> Option<f64> {
    let cols = affine_columns(proj)?;
    let lhs = |b: f64| -> f64 { cols.iter().map(|&(a, _, p)| p.powf(q) * a.powf(b)).sum() };
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while lhs(lo) < 1.0 {
        lo *= 2.0;
        if lo < -1e6 {
            return None;
        }
    }
    while lhs(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
