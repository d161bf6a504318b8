//! The q-modified singular value function, its level sums, the pressure
//! `P(s, q)`, and the moment scaling function `gamma(q)` defined by
//! `P(gamma(q), q) = 1`.
//!
//! For a word `w` and base point `a`,
//!
//! ```text
//! psi(w) = p(w)^q * a1(D_a S_w)^beta(q) * a2(D_a S_w)^(s - beta(q))
//! ```
//!
//! and `Psi_k` is the sum of `psi` over all words of length `k`. The pressure
//! is the growth rate of `Psi_k`; it is estimated here by the consecutive
//! ratio `Psi_k / Psi_{k-1}`, which is exact for systems with constant
//! derivatives. All sums are carried in log space.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{self, singular_values_unchecked, IfsSpec, JacobianEntries, Point, Word};
use crate::numeric::{log_sum_exp, LogSumExp};
use crate::projection::{self, BetaPoint};

/// Words enumerated per level sum before giving up.
pub const DEFAULT_WORD_BUDGET: usize = 5_000_000;
pub const DEFAULT_BASE_POINT: Point = (0.5, 0.5);
/// Bisection brackets for gamma may not grow past `±BRACKET_LIMIT`.
pub const BRACKET_LIMIT: f64 = 64.0;

pub fn psi(ifs: &IfsSpec, w: &Word, s: f64, q: f64, beta: f64, a: Point) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::InvalidArgument("psi needs a nonempty word".into()));
    }
    let jac = ifs::jacobian(ifs, w, a);
    let sv = ifs::singular_values(&jac)?;
    let p = ifs::weight(ifs, w);
    Ok((q * p.ln() + beta * sv.a1.ln() + (s - beta) * sv.a2.ln()).exp())
}

/// `(log p(w), log a1, log a2)` for one word.
type WordLogs = [f64; 3];

#[inline]
fn log_psi(entry: &WordLogs, s: f64, q: f64, beta: f64) -> f64 {
    q * entry[0] + beta * entry[1] + (s - beta) * entry[2]
}

fn check_budget(ifs: &IfsSpec, k: usize, budget: usize) -> Result<()> {
    let count = (ifs.len() as f64).powi(k as i32);
    if count > budget as f64 {
        return Err(Error::EnumerationBudget {
            limit: budget,
            context: format!("summing {} words of length {k}", count),
        });
    }
    Ok(())
}

/// Depth-first walk over all words up to length `k_max`, growing words on
/// the outer side so the orbit point and Jacobian update in O(1) per node.
/// `visit(level, logs)` sees every word of length `1..=k_max` exactly once,
/// in a fixed order.
fn walk_words(ifs: &IfsSpec, k_max: usize, a: Point, visit: &mut impl FnMut(usize, &WordLogs)) {
    fn rec(
        ifs: &IfsSpec,
        depth: usize,
        k_max: usize,
        pt: Point,
        jac: JacobianEntries,
        logp: f64,
        visit: &mut impl FnMut(usize, &WordLogs),
    ) {
        for m in ifs.maps() {
            let j = JacobianEntries::compose(&m.jacobian_at(pt), &jac);
            let sv = singular_values_unchecked(&j);
            let lp = logp + m.p().ln();
            visit(depth + 1, &[lp, sv.a1.ln(), sv.a2.ln()]);
            if depth + 1 < k_max {
                rec(ifs, depth + 1, k_max, m.apply(pt), j, lp, visit);
            }
        }
    }
    rec(ifs, 0, k_max, a, JacobianEntries::IDENTITY, 0.0, visit);
}

/// `log Psi_k` for `k = 1..=k_max` (index `k - 1`).
pub fn log_big_psi_levels(
    ifs: &IfsSpec,
    k_max: usize,
    s: f64,
    q: f64,
    beta: f64,
    a: Point,
    budget: usize,
) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    check_budget(ifs, k_max, budget)?;
    let mut acc = vec![LogSumExp::default(); k_max];
    walk_words(ifs, k_max, a, &mut |level, logs| {
        acc[level - 1].push(log_psi(logs, s, q, beta))
    });
    Ok(acc.iter().map(LogSumExp::value).collect())
}

pub fn big_psi(ifs: &IfsSpec, k: usize, s: f64, q: f64, beta: f64, a: Point) -> Result<f64> {
    let levels = log_big_psi_levels(ifs, k, s, q, beta, a, DEFAULT_WORD_BUDGET)?;
    Ok(levels[k - 1].exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub k_used: usize,
    pub base_point: Point,
}

/// Per-word logs for the three deepest levels, reusable across `(s, q, beta)`.
#[derive(Debug, Clone)]
pub struct LevelTable {
    k_max: usize,
    base_point: Point,
    // levels[0] is k_max - 2, levels[2] is k_max.
    levels: [Vec<WordLogs>; 3],
}

impl LevelTable {
    pub fn build(ifs: &IfsSpec, k_max: usize, a: Point, budget: usize) -> Result<Self> {
        if k_max < 3 {
            return Err(Error::InvalidArgument(format!(
                "k_max must be at least 3, got {k_max}"
            )));
        }
        check_budget(ifs, k_max, budget)?;
        let mut levels: [Vec<WordLogs>; 3] = Default::default();
        walk_words(ifs, k_max, a, &mut |level, logs| {
            if level + 2 >= k_max {
                levels[level + 2 - k_max].push(*logs);
            }
        });
        Ok(LevelTable {
            k_max,
            base_point: a,
            levels,
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn base_point(&self) -> Point {
        self.base_point
    }

    /// `log Psi_k` for `k` among the three cached levels.
    pub fn log_big_psi(&self, k: usize, s: f64, q: f64, beta: f64) -> f64 {
        assert!(
            k + 2 >= self.k_max && k <= self.k_max,
            "level {k} not cached"
        );
        let level = &self.levels[k + 2 - self.k_max];
        log_sum_exp(level.iter().map(|e| log_psi(e, s, q, beta)))
    }

    /// `log` of the ratio estimate `Psi_k / Psi_{k-1}` at `k = k_max`.
    pub fn log_pressure(&self, s: f64, q: f64, beta: f64) -> f64 {
        self.log_big_psi(self.k_max, s, q, beta) - self.log_big_psi(self.k_max - 1, s, q, beta)
    }

    pub fn pressure(&self, s: f64, q: f64, beta: f64) -> PressureEstimate {
        let k = self.k_max;
        let logs: Vec<f64> = (k - 2..=k)
            .map(|j| self.log_big_psi(j, s, q, beta))
            .collect();
        let value = (logs[2] - logs[1]).exp();
        let mut lower = value;
        let mut upper = value;
        for (j, l) in (k - 2..=k).zip(&logs) {
            let root = (l / j as f64).exp();
            lower = lower.min(root);
            upper = upper.max(root);
        }
        PressureEstimate {
            value,
            lower,
            upper,
            k_used: k,
            base_point: self.base_point,
        }
    }
}

pub fn pressure(
    ifs: &IfsSpec,
    s: f64,
    q: f64,
    beta: f64,
    k_max: usize,
    a: Point,
) -> Result<PressureEstimate> {
    Ok(LevelTable::build(ifs, k_max, a, DEFAULT_WORD_BUDGET)?.pressure(s, q, beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaPoint {
    pub q: f64,
    pub gamma: f64,
    /// `|P(gamma, q) - 1|` at `k_used`.
    pub residual: f64,
    pub beta_used: f64,
    pub k_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GammaOptions {
    pub tol: f64,
    pub k_max: usize,
    pub base_point: Point,
    pub budget: usize,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            tol: 1e-9,
            k_max: 12,
            base_point: DEFAULT_BASE_POINT,
            budget: DEFAULT_WORD_BUDGET,
        }
    }
}

pub fn gamma(ifs: &IfsSpec, q: f64, beta: f64, opts: &GammaOptions) -> Result<GammaPoint> {
    let table = LevelTable::build(ifs, opts.k_max, opts.base_point, opts.budget)?;
    gamma_from_table(&table, q, beta, opts.tol)
}

/// Solves `P(s, q) = 1` by bisection on an expanding bracket.
pub fn gamma_from_table(table: &LevelTable, q: f64, beta: f64, tol: f64) -> Result<GammaPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "q must be non-negative, got {q}"
        )));
    }
    let log_p = |s: f64| table.log_pressure(s, q, beta);
    let (mut lo, mut hi) = (-5.0f64, 5.0f64);
    // log P is decreasing in s: need log P(lo) > 0 > log P(hi).
    loop {
        let lo_ok = log_p(lo) > 0.0;
        let hi_ok = log_p(hi) < 0.0;
        if lo_ok && hi_ok {
            break;
        }
        if !lo_ok {
            lo *= 2.0;
        }
        if !hi_ok {
            hi *= 2.0;
        }
        if lo < -BRACKET_LIMIT || hi > BRACKET_LIMIT {
            return Err(Error::BracketExpansion {
                q,
                limit: BRACKET_LIMIT,
            });
        }
    }
    let residual_at = |s: f64| (log_p(s).exp() - 1.0).abs();
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        if hi - lo < tol && residual_at(mid) <= tol {
            break;
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if log_p(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GammaPoint {
        q,
        gamma: mid,
        residual: residual_at(mid),
        beta_used: beta,
        k_used: table.k_max(),
    })
}

/// How `beta(q)` is obtained before solving for `gamma(q)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSource {
    /// Mesh-moment regression on atoms of the projected stopping.
    Empirical { deltas: Vec<f64>, z0: f64 },
    /// Mesh-moment regression on a `2^bits`-bin histogram of the projected
    /// measure; scales to fine meshes where the stopping does not.
    Histogram { deltas: Vec<f64>, bits: u32 },
    /// Moment equation for affine, non-overlapping projections.
    ClosedForm,
}

impl BetaSource {
    pub fn label(&self) -> &'static str {
        match self {
            BetaSource::Empirical { .. } => "empirical",
            BetaSource::Histogram { .. } => "histogram",
            BetaSource::ClosedForm => "closed_form",
        }
    }
}

/// Resolves `beta(q)` for the horizontal projection of `ifs` at every `q`.
pub fn resolve_betas(ifs: &IfsSpec, qs: &[f64], source: &BetaSource) -> Result<Vec<BetaPoint>> {
    let proj = projection::project(ifs);
    match source {
        BetaSource::Empirical { deltas, z0 } => {
            projection::beta_empirical_curve(&proj, qs, deltas, *z0)
        }
        BetaSource::Histogram { deltas, bits } => {
            let hist = projection::ProjectedHistogram::build(&proj, *bits)?;
            projection::beta_histogram_curve(&hist, qs, deltas)
        }
        BetaSource::ClosedForm => qs
            .iter()
            .map(|&q| {
                let beta = projection::beta_closed_form(&proj, q).ok_or_else(|| {
                    Error::NoClosedForm("projection is not affine and column-separated".into())
                })?;
                Ok(BetaPoint {
                    q,
                    beta,
                    fit_r2: 1.0,
                    delta_range: (f64::NAN, f64::NAN),
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaCurve {
    pub points: Vec<GammaPoint>,
    pub betas: Vec<BetaPoint>,
    /// Gaps `gamma_{i+1} - gamma_i`; all negative when strictly decreasing.
    pub first_differences: Vec<f64>,
    /// Second differences scaled to the uniform-grid convention
    /// `gamma_{i-1} - 2 gamma_i + gamma_{i+1}` (chord excess on uneven grids).
    pub second_differences: Vec<f64>,
}

impl GammaCurve {
    pub fn strictly_decreasing(&self) -> bool {
        self.first_differences.iter().all(|&d| d < 0.0)
    }

    pub fn convex_within(&self, slack: f64) -> bool {
        self.second_differences.iter().all(|&d| d >= -slack)
    }
}

pub fn gamma_curve(
    ifs: &IfsSpec,
    q_grid: &[f64],
    opts: &GammaOptions,
    beta_source: &BetaSource,
) -> Result<GammaCurve> {
    if q_grid.is_empty() {
        return Err(Error::InvalidArgument("empty q grid".into()));
    }
    if let Some(q) = q_grid.iter().find(|q| !(**q >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "q must be non-negative, got {q}"
        )));
    }
    let table = LevelTable::build(ifs, opts.k_max, opts.base_point, opts.budget)?;
    let betas = resolve_betas(ifs, q_grid, beta_source)?;
    let points = betas
        .iter()
        .map(|b| gamma_from_table(&table, b.q, b.beta, opts.tol))
        .collect::<Result<Vec<_>>>()?;
    let first_differences = points.windows(2).map(|w| w[1].gamma - w[0].gamma).collect();
    let second_differences = points
        .windows(3)
        .map(|w| {
            let (q0, q1, q2) = (w[0].q, w[1].q, w[2].q);
            let chord = (w[0].gamma * (q2 - q1) + w[2].gamma * (q1 - q0)) / (q2 - q0);
            2.0 * (chord - w[1].gamma)
        })
        .collect();
    Ok(GammaCurve {
        points,
        betas,
        first_differences,
        second_differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn ln4() -> f64 {
        4.0f64.ln()
    }

    #[test]
    fn psi_examples() {
        let ss = catalog::self_similar_quarter();
        let w = Word::new(vec![1]);
        for beta in [0.0, 0.7, 1.0] {
            let v = psi(&ss, &w, 1.3, 2.0, beta, (0.2, 0.9)).unwrap();
            let expect = 0.25f64.powf(2.0) * 0.25f64.powf(1.3);
            assert!((v - expect).abs() < 1e-14 * expect);
        }

        let ex = catalog::three_map_example();
        for w in [vec![0], vec![1, 2], vec![2, 2, 0, 1]] {
            let v = psi(&ex, &Word::new(w), 0.0, 0.0, 0.8, (0.3, 0.3)).unwrap();
            assert!(v >= 1.0);
        }

        let v = psi(&ex, &Word::new(vec![0]), 1.0, 0.0, 1.0, (0.0, 0.0)).unwrap();
        assert!((v - 0.6).abs() < 1e-14);

        assert!(psi(&ex, &Word::empty(), 1.0, 0.0, 1.0, (0.0, 0.0)).is_err());
    }

    #[test]
    fn big_psi_examples() {
        let ss = catalog::self_similar_quarter();
        assert!((big_psi(&ss, 1, 0.0, 0.0, 0.5, (0.5, 0.5)).unwrap() - 3.0).abs() < 1e-13);
        let v = big_psi(&ss, 2, 0.0, 2.0, 0.5, (0.5, 0.5)).unwrap();
        assert!((v - 9.0 / 64.0).abs() < 1e-14);
        let dim = 3.0f64.ln() / ln4();
        for k in 1..=6 {
            let v = big_psi(&ss, k, dim, 0.0, 0.5, (0.5, 0.5)).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "k = {k}: {v}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let ss = catalog::self_similar_quarter();
        let err = log_big_psi_levels(&ss, 5, 0.0, 0.0, 0.0, (0.5, 0.5), 100).unwrap_err();
        assert!(matches!(err, Error::EnumerationBudget { limit: 100, .. }));
    }

    #[test]
    fn self_similar_pressure_is_exact() {
        let ss = catalog::self_similar_quarter();
        let (s, q) = (0.4, 1.7);
        let est = pressure(&ss, s, q, 0.3, 8, (0.1, 0.6)).unwrap();
        let exact: f64 = [0.5f64, 0.25, 0.25]
            .iter()
            .map(|p| p.powf(q) * 0.25f64.powf(s))
            .sum();
        assert!((est.value - exact).abs() < 1e-12 * exact);
        assert!(est.upper - est.lower < 1e-12);
    }

    #[test]
    fn pressure_decreases_in_s() {
        let ex = catalog::three_map_example();
        for &(s, q) in &[(0.0, 0.0), (1.0, 0.5), (-1.0, 2.0)] {
            let a = pressure(&ex, s, q, 0.9, 8, DEFAULT_BASE_POINT).unwrap();
            let b = pressure(&ex, s + 0.5, q, 0.9, 8, DEFAULT_BASE_POINT).unwrap();
            assert!(b.value < a.value);
        }
    }

    #[test]
    fn base_point_barely_matters() {
        let ex = catalog::three_map_example();
        let a = pressure(&ex, 1.2, 0.5, 0.95, 12, (0.0, 0.0)).unwrap();
        let b = pressure(&ex, 1.2, 0.5, 0.95, 12, (0.7, 0.3)).unwrap();
        assert!((a.value - b.value).abs() < 1e-3 * a.value, "{a:?} vs {b:?}");
    }

    #[test]
    fn self_similar_gamma_matches_moment_equation() {
        let ss = catalog::self_similar_quarter();
        let opts = GammaOptions {
            k_max: 6,
            ..Default::default()
        };
        let g0 = gamma(&ss, 0.0, 0.0, &opts).unwrap();
        assert!((g0.gamma - 3.0f64.ln() / ln4()).abs() < 1e-6);
        let g2 = gamma(&ss, 2.0, -1.0, &opts).unwrap();
        assert!((g2.gamma - (3.0f64 / 8.0).ln() / ln4()).abs() < 1e-6);
        assert!(g2.residual <= opts.tol);
    }

    #[test]
    fn gamma_vanishes_at_one() {
        let ex = catalog::three_map_example();
        let opts = GammaOptions {
            k_max: 8,
            ..Default::default()
        };
        let g = gamma(&ex, 1.0, 0.0, &opts).unwrap();
        assert!(g.gamma.abs() < 1e-6);
    }

    #[test]
    fn gamma_curve_on_self_similar_grid() {
        let ss = catalog::self_similar_quarter();
        let opts = GammaOptions {
            k_max: 6,
            ..Default::default()
        };
        let curve =
            gamma_curve(&ss, &[0.0, 0.5, 1.0, 2.0], &opts, &BetaSource::ClosedForm).unwrap();
        for pt in &curve.points {
            let exact = moment_root(pt.q);
            assert!((pt.gamma - exact).abs() < 1e-6, "q = {}", pt.q);
        }
        assert!(curve.strictly_decreasing());
        assert!(curve.convex_within(1e-6));
    }

    /// Root of `sum p_i^q 4^-g = 1` for the weights (1/2, 1/4, 1/4).
    fn moment_root(q: f64) -> f64 {
        let m: f64 = [0.5f64, 0.25, 0.25].iter().map(|p| p.powf(q)).sum();
        m.ln() / ln4()
    }

    #[test]
    fn gamma_rejects_bad_inputs() {
        let ss = catalog::self_similar_quarter();
        let opts = GammaOptions {
            k_max: 4,
            tol: 0.0,
            ..Default::default()
        };
        assert!(gamma(&ss, 1.0, 0.0, &opts).is_err());
        assert!(gamma_curve(&ss, &[], &GammaOptions::default(), &BetaSource::ClosedForm).is_err());
    }
}
