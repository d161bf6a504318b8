//! δ-stoppings, atom clouds, δ-mesh moment sums and the slope estimate of
//! the L^q spectrum.
//!
//! A δ-stopping is the prefix-free set of words whose chosen singular value
//! at the base point first drops below δ. Each word of a Diameter stopping
//! becomes one atom `S_w(z0)` of mass `p(w)`; atoms are binned into the
//! half-open δ-mesh anchored at the origin.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{
    self, orbit_jacobian, singular_values_unchecked, IfsSpec, JacobianEntries, Point, SingularPair,
    Word,
};
use crate::numeric::fit_line;
use crate::projection::{self as proj1d, validate_deltas, ProjectedHistogram};

/// Tree nodes visited per stopping walk before giving up.
pub const DEFAULT_STOPPING_BUDGET: usize = 1 << 28;
pub const DEFAULT_Z0: Point = (0.5, 0.5);
/// Meshes with at most this many cells are binned into a dense array.
const DENSE_CELL_LIMIT: usize = 1 << 22;
/// Strips stop once α₂ drops below this fraction of δ.
const STRIP_HEIGHT: f64 = 0.25;
/// Image bins per δ along a strip.
const STRIP_BINS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StoppingMode {
    /// Stop on the smaller singular value.
    Alpha2,
    /// Stop on the larger singular value, so each cylinder is δ-small.
    Diameter,
}

#[derive(Debug, Clone)]
pub struct StoppingSet {
    pub words: Vec<Word>,
    pub delta: f64,
    pub mode: StoppingMode,
    pub base_point: Point,
}

impl StoppingSet {
    pub fn total_mass(&self, ifs: &IfsSpec) -> f64 {
        self.words.iter().map(|w| ifs::weight(ifs, w)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct AtomCloud {
    pub atoms: Vec<(Point, f64)>,
    pub delta: f64,
}

impl AtomCloud {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// Dyadic mesh sizes `2^-from, ..., 2^-to`.
pub fn dyadic_ladder(from: u32, to: u32) -> Vec<f64> {
    (from..=to).map(|k| 0.5f64.powi(k as i32)).collect()
}

/// Rule deciding whether a word with singular values `sv` has stopped at
/// mesh size `delta`. Must be monotone: stopped at `delta` implies stopped
/// at every larger mesh size.
type StopRule = fn(&SingularPair, f64) -> bool;

fn stop_rule(mode: StoppingMode) -> StopRule {
    match mode {
        StoppingMode::Alpha2 => |sv, d| sv.a2 < d,
        StoppingMode::Diameter => |sv, d| sv.a1 < d,
    }
}

/// Strips: stop once the cylinder is small, or thin enough to be carried
/// along its centre line.
fn strip_rule(sv: &SingularPair, d: f64) -> bool {
    sv.a1 < d || sv.a2 < STRIP_HEIGHT * d
}

/// Walks the stopping tree for every δ in `deltas` (strictly decreasing)
/// at once. `emit(index, letters, point, jacobian, mass)` is called for each
/// word in the stopping of `deltas[index]`, in a fixed depth-first order.
fn walk_stoppings(
    ifs: &IfsSpec,
    deltas: &[f64],
    a: Point,
    stopped: StopRule,
    budget: usize,
    emit: &mut impl FnMut(usize, &[usize], Point, &JacobianEntries, f64),
) -> Result<()> {
    let finest = *deltas.last().expect("non-empty mesh list");
    let n = ifs.len();
    let probs = ifs.probabilities();
    let root = SingularPair { a1: 1.0, a2: 1.0 };
    let mut letters: Vec<usize> = Vec::new();
    let mut visited = 0usize;
    // (depth, letter, parent singular values, parent mass)
    let mut stack: Vec<(usize, usize, SingularPair, f64)> =
        (0..n).rev().map(|i| (0, i, root, 1.0)).collect();
    while let Some((depth, letter, parent_sv, parent_m)) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(Error::EnumerationBudget {
                limit: budget,
                context: format!("stopping at delta = {finest}, depth {depth}"),
            });
        }
        letters.truncate(depth);
        letters.push(letter);
        let (pt, jac) = orbit_jacobian(ifs, &letters, a);
        let sv = singular_values_unchecked(&jac);
        if !(sv.a1.is_finite() && sv.a2.is_finite()) {
            return Err(Error::NonFinite("singular value along a stopping walk"));
        }
        let mass = parent_m * probs[letter];
        for (k, &d) in deltas.iter().enumerate() {
            if stopped(&sv, d) && !stopped(&parent_sv, d) {
                emit(k, &letters, pt, &jac, mass);
            }
        }
        if !stopped(&sv, finest) {
            stack.extend((0..n).rev().map(|i| (depth + 1, i, sv, mass)));
        }
    }
    Ok(())
}

pub fn delta_stopping(
    ifs: &IfsSpec,
    delta: f64,
    a: Point,
    mode: StoppingMode,
) -> Result<StoppingSet> {
    delta_stopping_with_budget(ifs, delta, a, mode, DEFAULT_STOPPING_BUDGET)
}

pub fn delta_stopping_with_budget(
    ifs: &IfsSpec,
    delta: f64,
    a: Point,
    mode: StoppingMode,
    budget: usize,
) -> Result<StoppingSet> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::EmptyStopping { delta });
    }
    let mut words = Vec::new();
    walk_stoppings(
        ifs,
        &[delta],
        a,
        stop_rule(mode),
        budget,
        &mut |_, letters, _, _, _| words.push(Word::new(letters.to_vec())),
    )?;
    Ok(StoppingSet {
        words,
        delta,
        mode,
        base_point: a,
    })
}

pub fn atom_cloud(ifs: &IfsSpec, delta: f64, z0: Point) -> Result<AtomCloud> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::EmptyStopping { delta });
    }
    let mut atoms = Vec::new();
    walk_stoppings(
        ifs,
        &[delta],
        z0,
        stop_rule(StoppingMode::Diameter),
        DEFAULT_STOPPING_BUDGET,
        &mut |_, _, pt, _, mass| atoms.push((pt, mass)),
    )?;
    Ok(AtomCloud { atoms, delta })
}

/// Cell masses on the half-open δ-mesh of the unit square.
#[derive(Debug, Clone)]
enum Mesh {
    Dense {
        n: usize,
        delta: f64,
        mass: Vec<f64>,
    },
    Sparse {
        n: usize,
        delta: f64,
        mass: BTreeMap<(u32, u32), f64>,
    },
}

impl Mesh {
    fn new(delta: f64) -> Mesh {
        let n = (1.0 / delta).ceil() as usize;
        if n.saturating_mul(n) <= DENSE_CELL_LIMIT {
            Mesh::Dense {
                n,
                delta,
                mass: vec![0.0; n * n],
            }
        } else {
            Mesh::Sparse {
                n,
                delta,
                mass: BTreeMap::new(),
            }
        }
    }

    #[inline]
    fn cell(n: usize, delta: f64, v: f64) -> usize {
        ((v / delta).floor().max(0.0) as usize).min(n - 1)
    }

    #[inline]
    fn add(&mut self, (x, y): Point, m: f64) {
        match self {
            Mesh::Dense { n, delta, mass } => {
                let (i, j) = (Self::cell(*n, *delta, x), Self::cell(*n, *delta, y));
                mass[j * *n + i] += m;
            }
            Mesh::Sparse { n, delta, mass } => {
                let (i, j) = (Self::cell(*n, *delta, x), Self::cell(*n, *delta, y));
                *mass.entry((j as u32, i as u32)).or_insert(0.0) += m;
            }
        }
    }

    fn occupied(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Mesh::Dense { mass, .. } => Box::new(mass.iter().copied().filter(|&m| m > 0.0)),
            Mesh::Sparse { mass, .. } => Box::new(mass.values().copied().filter(|&m| m > 0.0)),
        }
    }

    /// `(sum m(Q)^q, number of occupied cells)`.
    fn moment(&self, q: f64) -> (f64, usize) {
        let mut sum = 0.0;
        let mut count = 0;
        for m in self.occupied() {
            sum += if q == 0.0 { 1.0 } else { m.powf(q) };
            count += 1;
        }
        (sum, count)
    }
}

pub fn moment_sum(cloud: &AtomCloud, delta: f64, q: f64) -> (f64, usize) {
    let mut mesh = Mesh::new(delta);
    for &(pt, m) in &cloud.atoms {
        mesh.add(pt, m);
    }
    mesh.moment(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub delta: f64,
    pub q: f64,
    pub moment: f64,
    pub occupied_cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn rows_for(&self, q: f64) -> impl Iterator<Item = &MomentRow> {
        self.rows.iter().filter(move |r| r.q == q)
    }
}

/// How cell masses of the δ-mesh are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeshMethod {
    /// One atom `S_w(z0)` per word of the Diameter stopping. Exact up to
    /// one-cell smearing, but the number of words grows like `δ^-s` with
    /// `s` the exponent of the larger singular value, which is far above
    /// the box dimension for strongly dominated systems.
    Atoms,
    /// Words of the α₂-stopping are thin strips `S_w([0,1]^2)`; each strip
    /// carries `p(w)` times the projected measure pushed along
    /// `x -> S_w(x, z0.y)`, with the projected measure taken from a
    /// histogram of `2^bits` bins, coarsened per strip so the image bins
    /// stay below δ/16.
    Strips { bits: u32 },
}

impl Default for MeshMethod {
    fn default() -> Self {
        MeshMethod::Strips {
            bits: proj1d::DEFAULT_HISTOGRAM_BITS,
        }
    }
}

/// Cell masses for every δ, from a single stopping walk to the finest δ.
fn build_meshes(ifs: &IfsSpec, deltas: &[f64], z0: Point, method: MeshMethod) -> Result<Vec<Mesh>> {
    let mut meshes: Vec<Mesh> = deltas.iter().map(|&d| Mesh::new(d)).collect();
    match method {
        MeshMethod::Atoms => walk_stoppings(
            ifs,
            deltas,
            z0,
            stop_rule(StoppingMode::Diameter),
            DEFAULT_STOPPING_BUDGET,
            &mut |k, _, pt, _, mass| meshes[k].add(pt, mass),
        )?,
        MeshMethod::Strips { bits } => {
            let hist = ProjectedHistogram::build(&proj1d::project(ifs), bits)?;
            let pyramid: Vec<Vec<f64>> = (0..=bits).map(|j| hist.coarsened(j)).collect();
            walk_stoppings(
                ifs,
                deltas,
                z0,
                strip_rule,
                DEFAULT_STOPPING_BUDGET,
                &mut |k, letters, pt, jac, mass| {
                    let delta = deltas[k];
                    if singular_values_unchecked(jac).a1 < delta {
                        meshes[k].add(pt, mass);
                        return;
                    }
                    let level = (STRIP_BINS * jac.fx / delta)
                        .log2()
                        .ceil()
                        .clamp(0.0, bits as f64);
                    let bins = &pyramid[level as usize];
                    let h = 1.0 / bins.len() as f64;
                    for (b, &m) in bins.iter().enumerate() {
                        if m > 0.0 {
                            let x = (b as f64 + 0.5) * h;
                            let pt = ifs::apply_letters(ifs, letters, (x, z0.1));
                            meshes[k].add(pt, mass * m);
                        }
                    }
                },
            )?
        }
    }
    Ok(meshes)
}

/// Mesh moments for every `(δ, q)`.
pub fn moment_table(
    ifs: &IfsSpec,
    qs: &[f64],
    deltas: &[f64],
    z0: Point,
    method: MeshMethod,
) -> Result<MomentTable> {
    if let Some(q) = qs.iter().find(|q| !(**q >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "q must be non-negative, got {q}"
        )));
    }
    validate_deltas(deltas, 1)?;
    let meshes = build_meshes(ifs, deltas, z0, method)?;
    let mut rows = Vec::with_capacity(deltas.len() * qs.len());
    for (mesh, &delta) in meshes.iter().zip(deltas) {
        for &q in qs {
            let (moment, occupied_cells) = mesh.moment(q);
            rows.push(MomentRow {
                delta,
                q,
                moment,
                occupied_cells,
            });
        }
    }
    Ok(MomentTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauEstimate {
    pub q: f64,
    pub tau: f64,
    pub fit_r2: f64,
    /// Coarsest and finest δ in the fit.
    pub deltas_used: (f64, f64),
}

/// Least-squares slope of `log moment` against `-log δ` for one `q`.
pub fn tau_from_table(table: &MomentTable, q: f64) -> Result<TauEstimate> {
    let rows: Vec<&MomentRow> = table.rows_for(q).collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (-r.delta.ln(), r.moment.ln()))
        .collect();
    let fit = fit_line(&pts)
        .ok_or_else(|| Error::InvalidArgument(format!("fewer than two mesh sizes for q = {q}")))?;
    Ok(TauEstimate {
        q,
        tau: fit.slope,
        fit_r2: fit.r2,
        deltas_used: (rows[0].delta, rows[rows.len() - 1].delta),
    })
}

pub fn tau_curve(
    ifs: &IfsSpec,
    qs: &[f64],
    deltas: &[f64],
    z0: Point,
    method: MeshMethod,
) -> Result<Vec<TauEstimate>> {
    validate_deltas(deltas, 4)?;
    let table = moment_table(ifs, qs, deltas, z0, method)?;
    qs.iter().map(|&q| tau_from_table(&table, q)).collect()
}

pub fn tau_empirical(ifs: &IfsSpec, q: f64, deltas: &[f64], z0: Point) -> Result<TauEstimate> {
    Ok(tau_curve(ifs, &[q], deltas, z0, MeshMethod::default())?[0])
}

/// Box-counting dimension of the attractor, the mesh spectrum at `q = 0`.
pub fn box_dimension(ifs: &IfsSpec, deltas: &[f64]) -> Result<TauEstimate> {
    tau_empirical(ifs, 0.0, deltas, DEFAULT_Z0)
}
