//! Shared workloads for the criterion benches in `benches/`.

use lqspec_core::empirical::dyadic_ladder;
use lqspec_core::{catalog, IfsSpec};

/// The curved three-map system and the self-similar oracle.
pub fn systems() -> Vec<(&'static str, IfsSpec)> {
    vec![
        ("three_map", catalog::three_map_example()),
        ("self_similar", catalog::self_similar_quarter()),
    ]
}

/// Mesh ladder from 2^-4 down to 2^-`finest`.
pub fn ladder(finest: u32) -> Vec<f64> {
    dyadic_ladder(4, finest)
}

pub const Q_GRID: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
