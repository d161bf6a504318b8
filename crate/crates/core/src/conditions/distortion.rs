//! Empirical distortion constants: how far Jacobian entries of a word vary
//! across the square, and how far the sums `Psi_k` are from multiplicative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{IfsSpec, JacobianEntries, Point};
use crate::pressure::{self, GammaOptions, DEFAULT_BASE_POINT, DEFAULT_WORD_BUDGET};
use crate::projection;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    /// Largest sampled `fx(w, a) / fx(w, b)` or `gy(w, a) / gy(w, b)`.
    pub r_hat: f64,
    /// Largest sampled `|gx(w, a)| / fx(w, b)`.
    pub c_hat: f64,
    /// Extremes of `Psi_{k+l} / (Psi_k Psi_l)` over `k + l <= k_max`.
    pub k1_hat: f64,
    pub k2_hat: f64,
    /// The `s` used for the `q = 0` multiplicativity sums.
    pub s_at_q0: f64,
    pub k_max: usize,
    pub samples: usize,
}

/// Samples `samples` random words of length `k_max` with a pair of uniform
/// points each; every suffix of every word contributes, so all lengths
/// `1..=k_max` are covered. Deterministic given `seed` (ChaCha8).
pub fn distortion_diagnostics(
    ifs: &IfsSpec,
    k_max: usize,
    samples: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "k_max must be at least 2, got {k_max}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r_hat: f64 = 1.0;
    let mut c_hat: f64 = 0.0;
    for _ in 0..samples {
        let mut a: Point = (rng.gen(), rng.gen());
        let mut b: Point = (rng.gen(), rng.gen());
        let mut ja = JacobianEntries::IDENTITY;
        let mut jb = JacobianEntries::IDENTITY;
        for _ in 0..k_max {
            let m = &ifs.maps()[rng.gen_range(0..ifs.len())];
            ja = JacobianEntries::compose(&m.jacobian_at(a), &ja);
            jb = JacobianEntries::compose(&m.jacobian_at(b), &jb);
            a = m.apply(a);
            b = m.apply(b);
            for (u, v) in [(&ja, &jb), (&jb, &ja)] {
                r_hat = r_hat.max(u.fx / v.fx).max(u.gy / v.gy);
                c_hat = c_hat.max(u.gx.abs() / v.fx);
            }
        }
    }

    // Multiplicativity at q = 1 (where beta = 0) and at q = 0 near the root
    // of the pressure.
    let proj = projection::project(ifs);
    let beta0 = projection::beta_closed_form(&proj, 0.0).unwrap_or(1.0);
    let opts = GammaOptions {
        k_max,
        ..GammaOptions::default()
    };
    let s0 = pressure::gamma(ifs, 0.0, beta0, &opts)?.gamma;
    let mut k1_hat = f64::INFINITY;
    let mut k2_hat = f64::NEG_INFINITY;
    for (s, q, beta) in [(s0, 0.0, beta0), (0.0, 1.0, 0.0)] {
        let logs = pressure::log_big_psi_levels(
            ifs,
            k_max,
            s,
            q,
            beta,
            DEFAULT_BASE_POINT,
            DEFAULT_WORD_BUDGET,
        )?;
        for k in 1..k_max {
            for l in 1..=k_max - k {
                let r = (logs[k + l - 1] - logs[k - 1] - logs[l - 1]).exp();
                k1_hat = k1_hat.min(r);
                k2_hat = k2_hat.max(r);
            }
        }
    }
    Ok(DistortionReport {
        r_hat,
        c_hat,
        k1_hat,
        k2_hat,
        s_at_q0: s0,
        k_max,
        samples,
    })
}
