//! Ready-made systems used throughout the tests, benches and CLI examples.

use crate::ifs::{IfsSpec, MapSpec};
use crate::poly::Poly2;

/// The three-map polynomial system
///
/// ```text
/// S1(x, y) = (3x/5 + 3x^2/40,          x^2/12 + y/6)
/// S2(x, y) = (4x/5 - 4x^3/30 + 1/3,    x^2/10 + y/4 + 17/50)
/// S3(x, y) = (3x/5,                    x^2/10 + y/5 + y^3/9 + 26/45)
/// ```
///
/// with uniform weights.
pub fn three_map_example() -> IfsSpec {
    three_map_example_weighted([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
}

pub fn three_map_example_weighted(p: [f64; 3]) -> IfsSpec {
    let s1 = MapSpec::new(
        Poly2::univariate(&[(1, 3.0 / 5.0), (2, 3.0 / 40.0)]),
        Poly2::from_triples(&[(2, 0, 1.0 / 12.0), (0, 1, 1.0 / 6.0)]),
        p[0],
    );
    let s2 = MapSpec::new(
        Poly2::univariate(&[(1, 4.0 / 5.0), (3, -4.0 / 30.0), (0, 1.0 / 3.0)]),
        Poly2::from_triples(&[(2, 0, 1.0 / 10.0), (0, 1, 1.0 / 4.0), (0, 0, 17.0 / 50.0)]),
        p[1],
    );
    let s3 = MapSpec::new(
        Poly2::univariate(&[(1, 3.0 / 5.0)]),
        Poly2::from_triples(&[
            (2, 0, 1.0 / 10.0),
            (0, 1, 1.0 / 5.0),
            (0, 3, 1.0 / 9.0),
            (0, 0, 26.0 / 45.0),
        ]),
        p[2],
    );
    IfsSpec::new(
        "three-map polynomial example",
        vec![s1.unwrap(), s2.unwrap(), s3.unwrap()],
    )
    .expect("valid system")
}

/// Three similarities of ratio 1/4 with weights (1/2, 1/4, 1/4), placed
/// along the diagonal. Staggering the copies by 3/8 keeps the dyadic mesh
/// from locking onto the 4-adic structure, which makes box-counting slopes
/// far less sensitive to the choice of δ window.
pub fn self_similar_quarter() -> IfsSpec {
    let r = 0.25;
    let placements = [(0.0, 0.0, 0.5), (0.375, 0.375, 0.25), (0.75, 0.75, 0.25)];
    IfsSpec::new(
        "self-similar, ratio 1/4",
        placements
            .iter()
            .map(|&(t, u, p)| MapSpec::diagonal_affine(r, t, r, u, p).unwrap())
            .collect(),
    )
    .expect("valid system")
}

/// Three maps `(x/2 + t, y/3 + u)`, one per row, two in the left column
/// and one in the right; uniform weights.
pub fn diagonal_carpet() -> IfsSpec {
    let placements = [(0.0, 0.0), (0.5, 1.0 / 3.0), (0.0, 2.0 / 3.0)];
    IfsSpec::new(
        "diagonal carpet 2x3",
        placements
            .iter()
            .map(|&(t, u)| MapSpec::diagonal_affine(0.5, t, 1.0 / 3.0, u, 1.0 / 3.0).unwrap())
            .collect(),
    )
    .expect("valid system")
}

/// Four half-scale squares tiling the unit square.
pub fn full_square() -> IfsSpec {
    let placements = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];
    IfsSpec::new(
        "full square",
        placements
            .iter()
            .map(|&(t, u)| MapSpec::diagonal_affine(0.5, t, 0.5, u, 0.25).unwrap())
            .collect(),
    )
    .expect("valid system")
}

/// Two maps `(x/2, y/3)` and `(x/2 + 1/2, y/3 + 2/3)`; the horizontal
/// projection is the dyadic Bernoulli measure with weights `p`.
pub fn dyadic_columns(p: f64) -> IfsSpec {
    IfsSpec::new(
        "dyadic columns",
        vec![
            MapSpec::diagonal_affine(0.5, 0.0, 1.0 / 3.0, 0.0, p).unwrap(),
            MapSpec::diagonal_affine(0.5, 0.5, 1.0 / 3.0, 2.0 / 3.0, 1.0 - p).unwrap(),
        ],
    )
    .expect("valid system")
}
