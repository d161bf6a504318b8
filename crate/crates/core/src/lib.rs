//! L^q spectra of Bernoulli measures on planar attractors generated by maps
//! of the form `S(x, y) = (f(x), g(x, y))`.
//!
//! The crate checks the standing hypotheses of a system (contraction,
//! domination of the vertical by the horizontal contraction, and the
//! rectangular open set condition), computes the moment scaling function
//! `gamma(q)` as the root of a pressure built from a q-modified singular
//! value function, and estimates the L^q spectrum directly from δ-mesh
//! moment sums so the two can be compared.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod conditions;
pub mod empirical;
pub mod error;
pub mod ifs;
pub mod numeric;
pub mod poly;
pub mod pressure;
pub mod projection;
pub mod render;

pub use conditions::{
    ContractionReport, DistortionReport, DominationReport, MapBounds, RoscStatus, RoscVerdict,
    RoscWitness,
};
pub use empirical::{AtomCloud, MeshMethod, MomentTable, StoppingMode, StoppingSet, TauEstimate};
pub use error::{Error, Result};
pub use ifs::{IfsSpec, JacobianEntries, MapSpec, Point, SingularPair, Word};
pub use poly::{Axis, Interval, Poly2, Rect, Term};
pub use pressure::{BetaSource, GammaCurve, GammaOptions, GammaPoint, PressureEstimate};
pub use projection::{BetaPoint, Projected1D};
pub use render::RasterImage;
