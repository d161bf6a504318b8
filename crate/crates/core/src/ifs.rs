//! Planar systems of maps `S(x, y) = (f(x), g(x, y))`, compositions along
//! words, and the lower-triangular Jacobians of those compositions.

use std::fmt;

use crate::error::{Error, Result};
use crate::poly::{Axis, Poly2};

pub type Point = (f64, f64);

/// One map of the system together with its selection probability.
#[derive(Debug, Clone)]
pub struct MapSpec {
    f: Poly2,
    g: Poly2,
    p: f64,
    fx: Poly2,
    gx: Poly2,
    gy: Poly2,
}

impl MapSpec {
    pub fn new(f: Poly2, g: Poly2, p: f64) -> Result<Self> {
        if f.depends_on(Axis::Y) {
            return Err(Error::InvalidSystem(format!(
                "horizontal component {f} depends on y"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidSystem(format!(
                "probability {p} not in (0, 1)"
            )));
        }
        let fx = f.partial(Axis::X);
        let gx = g.partial(Axis::X);
        let gy = g.partial(Axis::Y);
        Ok(MapSpec {
            f,
            g,
            p,
            fx,
            gx,
            gy,
        })
    }

    /// `(x, y) -> (a x + t, b y + u)`.
    pub fn diagonal_affine(a: f64, t: f64, b: f64, u: f64, p: f64) -> Result<Self> {
        MapSpec::new(
            Poly2::univariate(&[(1, a), (0, t)]),
            Poly2::from_triples(&[(0, 1, b), (0, 0, u)]),
            p,
        )
    }

    pub fn f(&self) -> &Poly2 {
        &self.f
    }
    pub fn g(&self) -> &Poly2 {
        &self.g
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn fx(&self) -> &Poly2 {
        &self.fx
    }
    pub fn gx(&self) -> &Poly2 {
        &self.gx
    }
    pub fn gy(&self) -> &Poly2 {
        &self.gy
    }

    #[inline]
    pub fn apply(&self, pt: Point) -> Point {
        (self.f.eval(pt), self.g.eval(pt))
    }

    #[inline]
    pub fn jacobian_at(&self, pt: Point) -> JacobianEntries {
        JacobianEntries {
            fx: self.fx.eval(pt),
            gx: self.gx.eval(pt),
            gy: self.gy.eval(pt),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IfsSpec {
    maps: Vec<MapSpec>,
    label: String,
}

impl IfsSpec {
    pub fn new(label: impl Into<String>, maps: Vec<MapSpec>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::InvalidSystem(format!(
                "need at least two maps, got {}",
                maps.len()
            )));
        }
        let total: f64 = maps.iter().map(|m| m.p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSystem(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(IfsSpec {
            maps,
            label: label.into(),
        })
    }

    pub fn maps(&self) -> &[MapSpec] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.p).collect()
    }

    /// Validated word constructor.
    pub fn word(&self, indices: &[usize]) -> Result<Word> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.maps.len()) {
            return Err(Error::InvalidArgument(format!(
                "letter {bad} out of range for {} maps",
                self.maps.len()
            )));
        }
        Ok(Word::new(indices.to_vec()))
    }
}

/// A finite word `i_1 ... i_k`, standing for `S_{i_1} ∘ ... ∘ S_{i_k}`.
/// The empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(indices: Vec<usize>) -> Self {
        Word(indices)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The word with its innermost (last) letter removed.
    pub fn parent(&self) -> Option<Word> {
        let (_, rest) = self.0.split_last()?;
        Some(Word(rest.to_vec()))
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn concat(&self, other: &Word) -> Word {
        Word(self.0.iter().chain(other.0.iter()).copied().collect())
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ω");
        }
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ".")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// Entries of the lower-triangular Jacobian `[[fx, 0], [gx, gy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianEntries {
    pub fx: f64,
    pub gx: f64,
    pub gy: f64,
}

impl JacobianEntries {
    pub const IDENTITY: JacobianEntries = JacobianEntries {
        fx: 1.0,
        gx: 0.0,
        gy: 1.0,
    };

    /// Matrix product `outer · inner`.
    #[inline]
    pub fn compose(outer: &JacobianEntries, inner: &JacobianEntries) -> JacobianEntries {
        JacobianEntries {
            fx: outer.fx * inner.fx,
            gx: outer.gx * inner.fx + outer.gy * inner.gx,
            gy: outer.gy * inner.gy,
        }
    }

    pub fn det(&self) -> f64 {
        self.fx * self.gy
    }
}

/// Singular values `a1 >= a2` of a Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPair {
    pub a1: f64,
    pub a2: f64,
}

pub fn apply(ifs: &IfsSpec, w: &Word, pt: Point) -> Point {
    apply_letters(ifs, w.indices(), pt)
}

/// `S_{i_1} ∘ ... ∘ S_{i_k}` applied to `pt`, for a raw letter slice.
pub fn apply_letters(ifs: &IfsSpec, letters: &[usize], pt: Point) -> Point {
    letters.iter().rev().fold(pt, |q, &i| ifs.maps[i].apply(q))
}

pub fn weight(ifs: &IfsSpec, w: &Word) -> f64 {
    w.indices().iter().map(|&i| ifs.maps[i].p).product()
}

/// Image point and Jacobian of `S_w` at `pt`, accumulated along the orbit
/// from the innermost letter outwards.
pub fn orbit_jacobian(ifs: &IfsSpec, letters: &[usize], pt: Point) -> (Point, JacobianEntries) {
    let mut q = pt;
    let mut jac = JacobianEntries::IDENTITY;
    for &i in letters.iter().rev() {
        let m = &ifs.maps[i];
        jac = JacobianEntries::compose(&m.jacobian_at(q), &jac);
        q = m.apply(q);
    }
    (q, jac)
}

pub fn jacobian(ifs: &IfsSpec, w: &Word, pt: Point) -> JacobianEntries {
    orbit_jacobian(ifs, w.indices(), pt).1
}

/// Closed-form singular values of a lower-triangular 2x2 matrix.
pub fn singular_values(j: &JacobianEntries) -> Result<SingularPair> {
    if !(j.fx.is_finite() && j.gx.is_finite() && j.gy.is_finite()) {
        return Err(Error::NonFinite("singular_values"));
    }
    if !(j.fx > 0.0 && j.gy > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diagonal entries must be positive, got fx = {}, gy = {}",
            j.fx, j.gy
        )));
    }
    Ok(singular_values_unchecked(j))
}

/// `a1 = (|(fx+gy, gx)| + |(fx-gy, gx)|) / 2`, which equals the root of
/// `(S + sqrt(S^2 - 4 fx^2 gy^2)) / 2` with `S = fx^2 + gx^2 + gy^2` but
/// avoids cancellation; `a2` comes from the determinant.
#[inline]
pub(crate) fn singular_values_unchecked(j: &JacobianEntries) -> SingularPair {
    let a1 = 0.5 * ((j.fx + j.gy).hypot(j.gx) + (j.fx - j.gy).hypot(j.gx));
    let a2 = (j.fx * j.gy).abs() / a1;
    SingularPair { a1, a2: a2.min(a1) }
}

/// Preimage of `pt` under map `i`, if `pt` lies in the image of the open
/// unit square. Relies on `f_i` and `g_i(x, ·)` being strictly increasing.
pub fn invert_map(ifs: &IfsSpec, i: usize, pt: Point, tol: f64) -> Option<Point> {
    let m = ifs.maps.get(i)?;
    let (px, py) = pt;
    let f = |x: f64| m.f.eval_x(x);
    if !(px > f(0.0) && px < f(1.0)) {
        return None;
    }
    let x = bisect_increasing(f, px, tol);
    let g = |y: f64| m.g.eval((x, y));
    if !(py > g(0.0) && py < g(1.0)) {
        return None;
    }
    let y = bisect_increasing(g, py, tol);
    let inside = |v: f64| v > 0.0 && v < 1.0;
    (inside(x) && inside(y)).then_some((x, y))
}

fn bisect_increasing(h: impl Fn(f64) -> f64, target: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let tol = tol.max(f64::EPSILON);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use proptest::prelude::*;

    /// Bottom-left entry as an explicit sum over letter positions: for each
    /// j, the product of outer g_y factors, the j-th g_x, and inner f_x
    /// factors, all evaluated along the orbit.
    fn gx_expanded(ifs: &IfsSpec, w: &[usize], pt: Point) -> f64 {
        let k = w.len();
        // orbit[j] = S_{i_{j+1} ... i_k}(pt), 0-based letters.
        let mut orbit = vec![pt; k + 1];
        for j in (0..k).rev() {
            orbit[j] = ifs.maps()[w[j]].apply(orbit[j + 1]);
        }
        let mut total = 0.0;
        for j in 0..k {
            let mut term = 1.0;
            for l in 0..j {
                term *= ifs.maps()[w[l]].gy().eval(orbit[l + 1]);
            }
            term *= ifs.maps()[w[j]].gx().eval(orbit[j + 1]);
            for l in j + 1..k {
                term *= ifs.maps()[w[l]].fx().eval(orbit[l + 1]);
            }
            total += term;
        }
        total
    }

    fn diag_product(ifs: &IfsSpec, w: &[usize], pt: Point, pick: fn(&MapSpec) -> &Poly2) -> f64 {
        let mut q = pt;
        let mut prod = 1.0;
        for &i in w.iter().rev() {
            prod *= pick(&ifs.maps()[i]).eval(q);
            q = ifs.maps()[i].apply(q);
        }
        prod
    }

    #[test]
    fn apply_examples() {
        let ifs = catalog::three_map_example();
        assert_eq!(apply(&ifs, &Word::empty(), (0.3, 0.7)), (0.3, 0.7));
        let (x, y) = apply(&ifs, &Word::new(vec![2]), (0.0, 0.0));
        assert_eq!(x, 0.0);
        assert!((y - 26.0 / 45.0).abs() < 1e-15);
        assert_eq!(apply(&ifs, &Word::new(vec![0, 0]), (0.0, 0.0)), (0.0, 0.0));
    }

    #[test]
    fn weight_examples() {
        let ifs = IfsSpec::new(
            "w",
            vec![
                MapSpec::diagonal_affine(0.5, 0.0, 0.5, 0.0, 0.5).unwrap(),
                MapSpec::diagonal_affine(0.25, 0.5, 0.25, 0.5, 0.25).unwrap(),
                MapSpec::diagonal_affine(0.25, 0.75, 0.25, 0.75, 0.25).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(weight(&ifs, &Word::empty()), 1.0);
        assert_eq!(weight(&ifs, &Word::new(vec![0, 1])), 1.0 / 8.0);
        assert_eq!(weight(&ifs, &Word::new(vec![2, 2, 2])), 1.0 / 64.0);
    }

    #[test]
    fn jacobian_examples() {
        let ifs = catalog::three_map_example();
        assert_eq!(
            jacobian(&ifs, &Word::empty(), (0.4, 0.4)),
            JacobianEntries::IDENTITY
        );
        let j = jacobian(&ifs, &Word::new(vec![0]), (0.0, 0.0));
        assert!((j.fx - 0.6).abs() < 1e-15);
        assert_eq!(j.gx, 0.0);
        assert!((j.gy - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn singular_value_examples() {
        let id = singular_values(&JacobianEntries::IDENTITY).unwrap();
        assert!((id.a1 - 1.0).abs() < 1e-15 && (id.a2 - 1.0).abs() < 1e-15);

        // Reference from the eigenvalues of A^T A.
        let s = singular_values(&JacobianEntries {
            fx: 0.6,
            gx: 0.3,
            gy: 0.2,
        })
        .unwrap();
        assert!((s.a1 - 0.677200187265877).abs() < 1e-12);
        assert!((s.a2 - 0.177200187265877).abs() < 1e-12);

        let d = singular_values(&JacobianEntries {
            fx: 0.7,
            gx: 0.0,
            gy: 0.3,
        })
        .unwrap();
        assert!((d.a1 - 0.7).abs() < 1e-15 && (d.a2 - 0.3).abs() < 1e-15);

        assert!(singular_values(&JacobianEntries {
            fx: f64::NAN,
            gx: 0.0,
            gy: 1.0
        })
        .is_err());
    }

    /// Independent route: eigenvalues of A^T A from the characteristic
    /// polynomial.
    fn singular_values_via_gram(j: &JacobianEntries) -> (f64, f64) {
        let (a, b, c) = (j.fx, j.gx, j.gy);
        // A^T A = [[a^2 + b^2, b c], [b c, c^2]]
        let (p, r, s) = (a * a + b * b, b * c, c * c);
        let tr = p + s;
        let det = p * s - r * r;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        (
            ((tr + disc) / 2.0).sqrt(),
            ((tr - disc) / 2.0).max(0.0).sqrt(),
        )
    }

    #[test]
    fn invert_map_examples() {
        let ifs = catalog::three_map_example();
        assert_eq!(invert_map(&ifs, 2, (0.0, 26.0 / 45.0), 1e-12), None);
        assert_eq!(invert_map(&ifs, 2, (0.9, 0.7), 1e-12), None);
        let z = (0.31, 0.77);
        let img = ifs.maps()[1].apply(z);
        let back = invert_map(&ifs, 1, img, 1e-13).unwrap();
        assert!((back.0 - z.0).abs() < 1e-10 && (back.1 - z.1).abs() < 1e-10);
    }

    fn arb_word(n: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0..n, 0..=max_len)
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(
            w in arb_word(3, 8), x in 0.05f64..0.95, y in 0.05f64..0.95,
        ) {
            let ifs = catalog::three_map_example();
            let word = Word::new(w);
            let h = 1e-5;
            let j = jacobian(&ifs, &word, (x, y));
            let px = apply(&ifs, &word, (x + h, y));
            let mx = apply(&ifs, &word, (x - h, y));
            let py = apply(&ifs, &word, (x, y + h));
            let my = apply(&ifs, &word, (x, y - h));
            let fd_fx = (px.0 - mx.0) / (2.0 * h);
            let fd_gx = (px.1 - mx.1) / (2.0 * h);
            let fd_gy = (py.1 - my.1) / (2.0 * h);
            let scale = j.fx.abs().max(1e-300);
            prop_assert!((fd_fx - j.fx).abs() <= 1e-5 * scale);
            prop_assert!((fd_gx - j.gx).abs() <= 1e-5 * scale);
            prop_assert!((fd_gy - j.gy).abs() <= 1e-5 * j.gy.abs().max(1e-300) + 1e-12 * scale);
        }

        #[test]
        fn running_product_matches_expanded_chain_rule(
            w in arb_word(3, 10), x in 0.0f64..1.0, y in 0.0f64..1.0,
        ) {
            let ifs = catalog::three_map_example();
            let j = jacobian(&ifs, &Word::new(w.clone()), (x, y));
            let fx = diag_product(&ifs, &w, (x, y), MapSpec::fx);
            let gy = diag_product(&ifs, &w, (x, y), MapSpec::gy);
            let gx = gx_expanded(&ifs, &w, (x, y));
            prop_assert!((j.fx - fx).abs() <= 1e-13 * fx.abs());
            prop_assert!((j.gy - gy).abs() <= 1e-13 * gy.abs());
            prop_assert!((j.gx - gx).abs() <= 1e-12 * fx.abs());
        }

        #[test]
        fn singular_values_multiply_to_determinant(
            fx in 1e-6f64..1.0, gx in -1.0f64..1.0, gy in 1e-6f64..1.0,
        ) {
            let j = JacobianEntries { fx, gx, gy };
            let s = singular_values(&j).unwrap();
            prop_assert!(s.a1 >= s.a2 && s.a2 > 0.0);
            prop_assert!((s.a1 * s.a2 - j.det()).abs() <= 1e-10 * j.det());
            let (g1, _) = singular_values_via_gram(&j);
            prop_assert!((s.a1 - g1).abs() <= 1e-9 * g1);
        }

        #[test]
        fn invert_round_trips(i in 0usize..3, x in 0.01f64..0.99, y in 0.01f64..0.99) {
            let ifs = catalog::three_map_example();
            let img = ifs.maps()[i].apply((x, y));
            let back = invert_map(&ifs, i, img, 1e-13).unwrap();
            prop_assert!((back.0 - x).abs() < 1e-9 && (back.1 - y).abs() < 1e-9);
        }
    }
}
