//! Run configuration read from a TOML file.
//!
//! ```toml
//! q_grid = [0, 0.5, 1, 2]
//! deltas = ["1/16", "1/32", "1/64", "1/128"]
//! k_max = 12
//! seed = 7
//!
//! [tolerances]
//! domination = 1e-10
//! gamma = 1e-9
//! rosc_depth = 12
//!
//! [[maps]]
//! f = [[1, 0, "3/5"], [2, 0, "3/40"]]
//! g = [[2, 0, "1/12"], [0, 1, "1/6"]]
//! p = "1/3"
//! ```
//!
//! Polynomial terms are `[deg_x, deg_y, coeff]`; coefficients and most reals
//! may be numbers or `"a/b"` strings.

use std::path::PathBuf;

use lqspec_core::empirical::{dyadic_ladder, MeshMethod, DEFAULT_Z0};
use lqspec_core::poly::parse_coefficient;
use lqspec_core::projection::DEFAULT_HISTOGRAM_BITS;
use lqspec_core::{IfsSpec, MapSpec, Point, Poly2, Term};
use serde::Deserialize;
use thiserror::Error;
use toml::Value;

/// Probabilities may miss 1 by this much; they are then rescaled exactly.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Syntax(String),

    #[error("configuration has no maps")]
    MissingMaps,

    #[error("probabilities sum to {sum}, not 1 (allowed slack {PROBABILITY_SLACK})")]
    Probabilities { sum: f64 },

    #[error("map {map}, {component} term {term}: {reason}")]
    MalformedTerm {
        map: usize,
        component: &'static str,
        term: usize,
        reason: String,
    },

    #[error("map {map}: {reason}")]
    InvalidMap { map: usize, reason: String },

    #[error("{field}: {reason}")]
    InvalidValue { field: String, reason: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    label: Option<String>,
    maps: Option<Vec<RawMap>>,
    q_grid: Option<Vec<Value>>,
    deltas: Option<Vec<Value>>,
    k_max: Option<i64>,
    seed: Option<i64>,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    estimators: RawEstimators,
    #[serde(default)]
    render: RawRender,
    #[serde(default)]
    diagnostics: RawDiagnostics,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    f: Vec<Vec<Value>>,
    g: Vec<Vec<Value>>,
    p: Value,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    domination: Option<Value>,
    gamma: Option<Value>,
    rosc: Option<Value>,
    rosc_depth: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimators {
    beta: Option<String>,
    histogram_bits: Option<i64>,
    mesh: Option<String>,
    z0: Option<Vec<Value>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRender {
    points: Option<i64>,
    burn_in: Option<i64>,
    width: Option<i64>,
    height: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    k_max: Option<i64>,
    samples: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Range-bounding tolerance for the derivative enclosures.
    pub domination: f64,
    /// Pressure-root tolerance.
    pub gamma: f64,
    /// Contact width below which overlapping image boxes count as touching.
    pub rosc: f64,
    /// Subdivision depth for the open set check.
    pub rosc_depth: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            domination: 1e-10,
            gamma: 1e-9,
            rosc: 1e-9,
            rosc_depth: 12,
        }
    }
}

/// Where `beta(q)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaChoice {
    /// Closed form when the projection is affine and column-separated,
    /// otherwise the histogram.
    Auto,
    Histogram,
    Empirical,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimators {
    pub beta: BetaChoice,
    pub histogram_bits: u32,
    pub mesh: MeshMethod,
    pub z0: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub points: usize,
    pub burn_in: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            points: 1_000_000,
            burn_in: 100,
            width: 800,
            height: 800,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSettings {
    pub k_max: usize,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: IfsSpec,
    pub q_grid: Vec<f64>,
    pub deltas: Vec<f64>,
    pub k_max: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub estimators: Estimators,
    pub render: RenderSettings,
    pub diagnostics: DiagnosticSettings,
    pub output_dir: Option<PathBuf>,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        field: field.into(),
        reason: reason.into(),
    }
}

fn real(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(x) if x.is_finite() => Ok(*x),
        Value::String(s) => parse_coefficient(s).map_err(|e| e.to_string()),
        other => Err(format!("expected a number or \"a/b\", got {other}")),
    }
}

fn real_field(field: &str, v: &Value) -> Result<f64> {
    real(v).map_err(|r| invalid(field, r))
}

fn positive_real(field: &str, v: Option<&Value>, default: f64) -> Result<f64> {
    let x = match v {
        Some(v) => real_field(field, v)?,
        None => default,
    };
    if x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(field, format!("must be positive, got {x}")))
    }
}

fn count(field: &str, v: Option<i64>, default: usize, min: usize) -> Result<usize> {
    let Some(v) = v else {
        return Ok(default);
    };
    if v < min as i64 {
        return Err(invalid(field, format!("must be at least {min}, got {v}")));
    }
    Ok(v as usize)
}

fn parse_terms(map: usize, component: &'static str, raw: &[Vec<Value>]) -> Result<Poly2> {
    let mut terms = Vec::with_capacity(raw.len());
    for (term, t) in raw.iter().enumerate() {
        let bad = |reason: String| ConfigError::MalformedTerm {
            map,
            component,
            term,
            reason,
        };
        if t.len() != 3 {
            return Err(bad(format!(
                "expected [deg_x, deg_y, coeff], got {} entries",
                t.len()
            )));
        }
        let degree = |v: &Value, axis: &str| match v {
            Value::Integer(d) if *d < 0 => Err(bad(format!("negative {axis} degree {d}"))),
            Value::Integer(d) if *d > u32::MAX as i64 => {
                Err(bad(format!("{axis} degree {d} too large")))
            }
            Value::Integer(d) => Ok(*d as u32),
            other => Err(bad(format!(
                "{axis} degree must be an integer, got {other}"
            ))),
        };
        let dx = degree(&t[0], "x")?;
        let dy = degree(&t[1], "y")?;
        if component == "f" && dy > 0 {
            return Err(bad(format!("f must not depend on y, found y^{dy}")));
        }
        let coeff = real(&t[2]).map_err(bad)?;
        terms.push(Term::new(dx, dy, coeff));
    }
    Ok(Poly2::new(terms))
}

fn parse_ladder(raw: Option<Vec<Value>>) -> Result<Vec<f64>> {
    let Some(raw) = raw else {
        return Ok(dyadic_ladder(4, 11));
    };
    let deltas = raw
        .iter()
        .map(|v| real_field("deltas", v))
        .collect::<Result<Vec<f64>>>()?;
    if deltas.len() < 4 {
        return Err(invalid("deltas", "need at least four mesh sizes"));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(invalid("deltas", format!("{d} is outside (0, 1)")));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("deltas", "must be strictly decreasing"));
    }
    Ok(deltas)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let raw_maps = raw.maps.unwrap_or_default();
    if raw_maps.is_empty() {
        return Err(ConfigError::MissingMaps);
    }
    let mut parts = Vec::with_capacity(raw_maps.len());
    for (i, m) in raw_maps.iter().enumerate() {
        let f = parse_terms(i, "f", &m.f)?;
        let g = parse_terms(i, "g", &m.g)?;
        let p = real(&m.p).map_err(|r| ConfigError::InvalidMap {
            map: i,
            reason: format!("probability: {r}"),
        })?;
        if !(p > 0.0) {
            return Err(ConfigError::InvalidMap {
                map: i,
                reason: format!("probability must be positive, got {p}"),
            });
        }
        parts.push((f, g, p));
    }
    let sum: f64 = parts.iter().map(|t| t.2).sum();
    if (sum - 1.0).abs() > PROBABILITY_SLACK {
        return Err(ConfigError::Probabilities { sum });
    }
    let maps = parts
        .into_iter()
        .enumerate()
        .map(|(i, (f, g, p))| {
            MapSpec::new(f, g, p / sum).map_err(|e| ConfigError::InvalidMap {
                map: i,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let label = raw.label.unwrap_or_else(|| "configured system".into());
    let system = IfsSpec::new(label, maps).map_err(|e| ConfigError::InvalidMap {
        map: 0,
        reason: e.to_string(),
    })?;

    let q_grid = match raw.q_grid {
        Some(v) => v
            .iter()
            .map(|q| real_field("q_grid", q))
            .collect::<Result<Vec<f64>>>()?,
        None => vec![0.0, 0.5, 1.0, 2.0, 3.0],
    };
    if q_grid.is_empty() {
        return Err(invalid("q_grid", "empty"));
    }
    if let Some(q) = q_grid.iter().find(|q| !(**q >= 0.0)) {
        return Err(invalid(
            "q_grid",
            format!("q must be non-negative, got {q}"),
        ));
    }

    let deltas = parse_ladder(raw.deltas)?;
    let k_max = count("k_max", raw.k_max, 12, 3)?;
    let seed = match raw.seed {
        Some(s) if s < 0 => return Err(invalid("seed", "must be non-negative")),
        Some(s) => s as u64,
        None => 0,
    };

    let defaults = Tolerances::default();
    let t = &raw.tolerances;
    let tolerances = Tolerances {
        domination: positive_real(
            "tolerances.domination",
            t.domination.as_ref(),
            defaults.domination,
        )?,
        gamma: positive_real("tolerances.gamma", t.gamma.as_ref(), defaults.gamma)?,
        rosc: positive_real("tolerances.rosc", t.rosc.as_ref(), defaults.rosc)?,
        rosc_depth: count(
            "tolerances.rosc_depth",
            t.rosc_depth,
            defaults.rosc_depth,
            0,
        )?,
    };

    let e = &raw.estimators;
    let beta = match e.beta.as_deref() {
        None | Some("auto") => BetaChoice::Auto,
        Some("histogram") => BetaChoice::Histogram,
        Some("empirical") => BetaChoice::Empirical,
        Some("closed_form") => BetaChoice::ClosedForm,
        Some(other) => {
            return Err(invalid(
                "estimators.beta",
                format!("unknown source {other:?} (auto, histogram, empirical, closed_form)"),
            ))
        }
    };
    // The histogram must resolve the finest mesh into at least four bins.
    let finest = *deltas.last().expect("validated ladder");
    let needed = (4.0 / finest).log2().ceil() as i64;
    let histogram_bits = match e.histogram_bits {
        Some(b) if !(4..=26).contains(&b) => {
            return Err(invalid(
                "estimators.histogram_bits",
                format!("{b} outside 4..=26"),
            ))
        }
        Some(b) if b < needed => {
            return Err(invalid(
                "estimators.histogram_bits",
                format!("{b} bins are too coarse for mesh {finest}; need at least {needed}"),
            ))
        }
        Some(b) => b as u32,
        None => (DEFAULT_HISTOGRAM_BITS as i64).max(needed).min(26) as u32,
    };
    let mesh = match e.mesh.as_deref() {
        None | Some("strips") => MeshMethod::Strips {
            bits: histogram_bits,
        },
        Some("atoms") => MeshMethod::Atoms,
        Some(other) => {
            return Err(invalid(
                "estimators.mesh",
                format!("unknown method {other:?} (strips, atoms)"),
            ))
        }
    };
    let z0 = match &e.z0 {
        None => DEFAULT_Z0,
        Some(v) if v.len() == 2 => {
            let x = real_field("estimators.z0", &v[0])?;
            let y = real_field("estimators.z0", &v[1])?;
            if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                return Err(invalid("estimators.z0", "must lie in the unit square"));
            }
            (x, y)
        }
        Some(_) => return Err(invalid("estimators.z0", "expected [x, y]")),
    };

    let r = &raw.render;
    let rd = RenderSettings::default();
    let render = RenderSettings {
        points: count("render.points", r.points, rd.points, 1)?,
        burn_in: count("render.burn_in", r.burn_in, rd.burn_in, 0)?,
        width: count("render.width", r.width, rd.width, 1)?,
        height: count("render.height", r.height, rd.height, 1)?,
    };

    let diagnostics = DiagnosticSettings {
        k_max: count("diagnostics.k_max", raw.diagnostics.k_max, k_max.min(8), 2)?,
        samples: count("diagnostics.samples", raw.diagnostics.samples, 2000, 1)?,
    };

    Ok(RunConfig {
        system,
        q_grid,
        deltas,
        k_max,
        seed,
        tolerances,
        estimators: Estimators {
            beta,
            histogram_bits,
            mesh,
            z0,
        },
        render,
        diagnostics,
        output_dir: raw.output.dir.map(PathBuf::from),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAPS: &str = r#"
[[maps]]
f = [[1, 0, "1/2"]]
g = [[0, 1, "1/3"]]
p = "1/2"

[[maps]]
f = [[1, 0, 0.5], [0, 0, 0.5]]
g = [[0, 1, "1/3"], [0, 0, "2/3"]]
p = 0.5
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_config(MAPS).unwrap();
        assert_eq!(cfg.system.len(), 2);
        assert_eq!(cfg.q_grid, vec![0.0, 0.5, 1.0, 2.0, 3.0]);
        assert_eq!(cfg.deltas.len(), 8);
        assert_eq!(cfg.k_max, 12);
        assert_eq!(cfg.estimators.beta, BetaChoice::Auto);
        assert_eq!(cfg.estimators.mesh, MeshMethod::Strips { bits: 18 });
        assert_eq!(cfg.tolerances, Tolerances::default());
    }

    #[test]
    fn missing_maps() {
        assert!(matches!(
            parse_config("k_max = 5"),
            Err(ConfigError::MissingMaps)
        ));
        assert!(matches!(
            parse_config("maps = []"),
            Err(ConfigError::MissingMaps)
        ));
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let text = MAPS.replace("p = 0.5", "p = 0.6");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Probabilities { .. })
        ));

        // Within slack the weights are rescaled to sum to 1 exactly.
        let text = MAPS.replace("p = 0.5", "p = 0.5000000001");
        let cfg = parse_config(&text).unwrap();
        let sum: f64 = cfg.system.probabilities().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_degree_is_a_term_error() {
        let text = MAPS.replace("g = [[0, 1, \"1/3\"]]", "g = [[0, -1, \"1/3\"]]");
        match parse_config(&text) {
            Err(ConfigError::MalformedTerm {
                map: 0,
                component: "g",
                term: 0,
                reason,
            }) => {
                assert!(reason.contains("negative"), "{reason}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_terms() {
        for (from, to) in [
            ("f = [[1, 0, \"1/2\"]]", "f = [[1, 0]]"),
            ("f = [[1, 0, \"1/2\"]]", "f = [[1.5, 0, 2]]"),
            ("f = [[1, 0, \"1/2\"]]", "f = [[1, 0, \"one\"]]"),
            ("f = [[1, 0, \"1/2\"]]", "f = [[1, 1, \"1/2\"]]"),
        ] {
            let text = MAPS.replace(from, to);
            assert!(
                matches!(parse_config(&text), Err(ConfigError::MalformedTerm { .. })),
                "{to}"
            );
        }
    }

    #[test]
    fn rejects_bad_values() {
        for extra in [
            "q_grid = [-1]",
            "deltas = [0.5, 0.25]",
            "deltas = [0.5, 0.25, 0.5, 0.1]",
            "k_max = 2",
            "[tolerances]\ngamma = 0",
            "[estimators]\nbeta = \"magic\"",
            "[estimators]\nhistogram_bits = 8",
            "unknown_key = 1",
        ] {
            let text = format!("{extra}\n{MAPS}");
            let text = if extra.starts_with('[') {
                format!("{MAPS}\n{extra}")
            } else {
                text
            };
            assert!(parse_config(&text).is_err(), "{extra}");
        }
    }

    #[test]
    fn histogram_follows_the_finest_mesh() {
        let text = format!("deltas = [\"1/16\", \"1/32\", \"1/64\", \"1/1048576\"]\n{MAPS}");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.estimators.histogram_bits, 22);
    }
}
