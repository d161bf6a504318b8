//! Command implementations: gate checks, spectrum estimates and the files
//! they emit.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lqspec_core::conditions::{
    check_contraction, check_domination, check_rosc, distortion_diagnostics, ContractionReport,
    DistortionReport, DominationReport, RoscStatus, RoscVerdict,
};
use lqspec_core::empirical::{moment_table, tau_from_table, MomentTable};
use lqspec_core::pressure::{gamma_curve, BetaSource, GammaCurve, GammaOptions};
use lqspec_core::projection::{self, BetaPoint};
use lqspec_core::render::{chaos_game, rasterize, write_atomic};
use lqspec_core::TauEstimate;
use serde::Serialize;
use thiserror::Error;

use crate::config::{BetaChoice, RunConfig};

/// Frozen column layout of `report.csv`.
pub const REPORT_HEADER: &str = "q,beta,beta_src,gamma,gamma_residual,tau_hat,tau_r2,abs_gap";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Render,
    Beta,
    Gamma,
    Tau,
    Report,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] lqspec_core::Error),

    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("encoding validation report: {0}")]
    Json(#[from] serde_json::Error),
}

/// What a command produced. `gates_passed` is false when a hypothesis
/// check failed and downstream work was skipped.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub gates_passed: bool,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub messages: Vec<String>,
}

impl Outcome {
    /// 0 on success, 2 when a gate failed.
    pub fn exit_code(&self) -> i32 {
        if self.gates_passed {
            0
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub system: String,
    pub maps: usize,
    pub contraction: ContractionReport,
    pub domination: DominationReport,
    pub rosc: RoscVerdict,
    pub distortion: Option<DistortionReport>,
    pub gates_passed: bool,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

/// Contraction, domination and open set checks. Similarities sit on the
/// boundary `inf fx = sup gy`, so the gate accepts weak domination and the
/// strict verdict is reported separately.
pub fn validate(cfg: &RunConfig, with_distortion: bool) -> Result<Validation, RunError> {
    let ifs = &cfg.system;
    let tol = &cfg.tolerances;
    let contraction = check_contraction(ifs, tol.domination)?;
    let domination = check_domination(ifs, tol.domination)?;
    let rosc = check_rosc(ifs, tol.rosc_depth, tol.rosc);
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    if !contraction.self_map {
        failures.push("a map does not send the unit square into itself".to_string());
    }
    if contraction.c_bound >= 1.0 {
        failures.push(format!(
            "contraction not certified (Lipschitz bound {})",
            contraction.c_bound
        ));
    }
    if !domination.weak_pass {
        failures.push(format!(
            "domination fails (d = {}, eta = {})",
            domination.d, domination.eta
        ));
    } else if !domination.pass {
        warnings.push(
            "domination holds only with equality inf fx = sup gy (conformal maps)".to_string(),
        );
    }
    match rosc.status {
        RoscStatus::Verified => {}
        RoscStatus::Violated => {
            let w = rosc.witness.expect("violations carry a witness");
            failures.push(format!(
                "open set condition violated: maps {} and {} share the point ({}, {})",
                w.maps.0, w.maps.1, w.point.0, w.point.1
            ));
        }
        RoscStatus::Inconclusive => warnings.push(format!(
            "open set condition inconclusive at depth {} ({} box pairs unresolved); \
             the spectrum is then only bounded on one side",
            rosc.max_depth, rosc.unresolved
        )),
    }
    let gates_passed = failures.is_empty();
    let distortion = if with_distortion && gates_passed {
        Some(distortion_diagnostics(
            ifs,
            cfg.diagnostics.k_max,
            cfg.diagnostics.samples,
            cfg.seed,
        )?)
    } else {
        None
    };
    Ok(Validation {
        system: ifs.label().to_string(),
        maps: ifs.len(),
        contraction,
        domination,
        rosc,
        distortion,
        gates_passed,
        warnings,
        failures,
    })
}

pub fn validation_text(v: &Validation) -> String {
    let mut s = String::new();
    let yes = |b: bool| if b { "pass" } else { "FAIL" };
    let _ = writeln!(s, "system: {} ({} maps)", v.system, v.maps);
    let c = &v.contraction;
    let _ = writeln!(
        s,
        "contraction: {} (c_bound = {}, self-map {})",
        yes(c.c_bound < 1.0),
        c.c_bound,
        yes(c.self_map)
    );
    for (i, m) in c.maps.iter().enumerate() {
        let _ = writeln!(
            s,
            "  map {i}: lipschitz <= {}, f range [{}, {}], g range [{}, {}]",
            m.lipschitz,
            m.f_range.lo(),
            m.f_range.hi(),
            m.g_range.lo(),
            m.g_range.hi()
        );
    }
    let d = &v.domination;
    let _ = writeln!(
        s,
        "domination: {} (strict {}), d = {}, eta = {}",
        yes(d.weak_pass),
        yes(d.pass),
        d.d,
        d.eta
    );
    for (i, m) in d.maps.iter().enumerate() {
        let _ = writeln!(
            s,
            "  map {i}: fx in [{}, {}], gy in [{}, {}], gx in [{}, {}]",
            m.inf_fx, m.sup_fx, m.inf_gy, m.sup_gy, m.inf_gx, m.sup_gx
        );
    }
    let _ = writeln!(
        s,
        "  alpha_min = {}, alpha_max = {}, p_min = {}, p_max = {}",
        d.alpha_min, d.alpha_max, d.p_min, d.p_max
    );
    let r = &v.rosc;
    let _ = writeln!(
        s,
        "rosc: {:?} (depth {}, {} box pairs, {} unresolved)",
        r.status, r.max_depth, r.nodes, r.unresolved
    );
    if let Some(w) = &r.witness {
        let _ = writeln!(
            s,
            "  witness: maps {} and {} at ({}, {})",
            w.maps.0, w.maps.1, w.point.0, w.point.1
        );
    }
    if let Some(t) = &v.distortion {
        let _ = writeln!(
            s,
            "distortion: R = {}, C = {}, K1 = {}, K2 = {} (words up to {}, {} samples)",
            t.r_hat, t.c_hat, t.k1_hat, t.k2_hat, t.k_max, t.samples
        );
    }
    for w in &v.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    for f in &v.failures {
        let _ = writeln!(s, "failure: {f}");
    }
    let _ = writeln!(s, "gates: {}", yes(v.gates_passed));
    s
}

fn beta_source(cfg: &RunConfig) -> BetaSource {
    let est = &cfg.estimators;
    let histogram = BetaSource::Histogram {
        deltas: cfg.deltas.clone(),
        bits: est.histogram_bits,
    };
    match est.beta {
        BetaChoice::Histogram => histogram,
        BetaChoice::Empirical => BetaSource::Empirical {
            deltas: cfg.deltas.clone(),
            z0: est.z0.0,
        },
        BetaChoice::ClosedForm => BetaSource::ClosedForm,
        BetaChoice::Auto => {
            let proj = projection::project(&cfg.system);
            if projection::beta_closed_form(&proj, 0.0).is_some() {
                BetaSource::ClosedForm
            } else {
                histogram
            }
        }
    }
}

fn gamma_options(cfg: &RunConfig) -> GammaOptions {
    GammaOptions {
        tol: cfg.tolerances.gamma,
        k_max: cfg.k_max,
        ..GammaOptions::default()
    }
}

pub fn betas(cfg: &RunConfig) -> Result<(Vec<BetaPoint>, &'static str), RunError> {
    let source = beta_source(cfg);
    let pts = lqspec_core::pressure::resolve_betas(&cfg.system, &cfg.q_grid, &source)?;
    Ok((pts, source.label()))
}

pub fn gammas(cfg: &RunConfig) -> Result<(GammaCurve, &'static str), RunError> {
    let source = beta_source(cfg);
    let curve = gamma_curve(&cfg.system, &cfg.q_grid, &gamma_options(cfg), &source)?;
    Ok((curve, source.label()))
}

pub fn taus(cfg: &RunConfig) -> Result<(Vec<TauEstimate>, MomentTable), RunError> {
    let table = moment_table(
        &cfg.system,
        &cfg.q_grid,
        &cfg.deltas,
        cfg.estimators.z0,
        cfg.estimators.mesh,
    )?;
    let taus = cfg
        .q_grid
        .iter()
        .map(|&q| tau_from_table(&table, q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((taus, table))
}

/// Empty for NaN so closed-form rows leave mesh columns blank; `-0` is
/// written as `0`.
fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{}", x + 0.0)
    }
}

pub fn beta_csv(points: &[BetaPoint], src: &str) -> String {
    let mut s = String::from("q,beta,beta_src,fit_r2,delta_coarse,delta_fine\n");
    for b in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(b.q),
            num(b.beta),
            src,
            num(b.fit_r2),
            num(b.delta_range.0),
            num(b.delta_range.1)
        );
    }
    s
}

pub fn gamma_csv(curve: &GammaCurve, src: &str) -> String {
    let mut s = String::from("q,beta,beta_src,gamma,gamma_residual,k_used\n");
    for p in &curve.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(p.q),
            num(p.beta_used),
            src,
            num(p.gamma),
            num(p.residual),
            p.k_used
        );
    }
    s
}

pub fn tau_csv(taus: &[TauEstimate]) -> String {
    let mut s = String::from("q,tau_hat,tau_r2,delta_coarse,delta_fine\n");
    for t in taus {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(t.q),
            num(t.tau),
            num(t.fit_r2),
            num(t.deltas_used.0),
            num(t.deltas_used.1)
        );
    }
    s
}

pub fn moments_csv(table: &MomentTable) -> String {
    let mut s = String::from("delta,q,moment,occupied_cells\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(r.delta),
            num(r.q),
            num(r.moment),
            r.occupied_cells
        );
    }
    s
}

pub fn report_csv(curve: &GammaCurve, src: &str, taus: &[TauEstimate]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for (p, t) in curve.points.iter().zip(taus) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(p.q),
            num(p.beta_used),
            src,
            num(p.gamma),
            num(p.residual),
            num(t.tau),
            num(t.fit_r2),
            num((t.tau - p.gamma).abs())
        );
    }
    s
}

fn summary_text(v: &Validation, curve: &GammaCurve, src: &str, taus: &[TauEstimate]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "system: {} ({} maps)", v.system, v.maps);
    let _ = writeln!(
        s,
        "gates: {} (rosc {:?}, strict domination {})",
        if v.gates_passed { "pass" } else { "FAIL" },
        v.rosc.status,
        v.domination.pass
    );
    let _ = writeln!(s, "beta source: {src}");
    let _ = writeln!(
        s,
        "{:>6}  {:>12}  {:>12}  {:>12}  {:>10}",
        "q", "beta", "gamma", "tau_hat", "|gap|"
    );
    let mut worst: f64 = 0.0;
    for (p, t) in curve.points.iter().zip(taus) {
        let gap = (t.tau - p.gamma).abs();
        worst = worst.max(gap);
        let _ = writeln!(
            s,
            "{:>6}  {:>12.6}  {:>12.6}  {:>12.6}  {:>10.6}",
            p.q, p.beta_used, p.gamma, t.tau, gap
        );
    }
    let _ = writeln!(s, "max |tau_hat - gamma|: {worst:.6}");
    let _ = writeln!(
        s,
        "gamma strictly decreasing: {}, convex: {}",
        curve.strictly_decreasing(),
        curve.convex_within(1e-6)
    );
    for w in &v.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

fn render_ppm(cfg: &RunConfig) -> Result<Vec<u8>, RunError> {
    let r = &cfg.render;
    let points = chaos_game(&cfg.system, r.points, cfg.seed, r.burn_in)?;
    Ok(rasterize(&points, r.width, r.height)?.to_ppm())
}

pub fn run(cfg: &RunConfig, command: Command, out_dir: &Path) -> Result<Outcome, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut out = Writer {
        dir: out_dir,
        files: Vec::new(),
    };

    if command == Command::Render {
        let c = check_contraction(&cfg.system, cfg.tolerances.domination)?;
        if !c.pass() {
            return Ok(Outcome {
                gates_passed: false,
                messages: vec![format!(
                    "not a contraction of the unit square (c_bound = {}, self-map {})",
                    c.c_bound, c.self_map
                )],
                ..Outcome::default()
            });
        }
        out.put("attractor.ppm", &render_ppm(cfg)?)?;
        return Ok(Outcome {
            gates_passed: true,
            files: out.files,
            ..Outcome::default()
        });
    }

    let with_files = matches!(command, Command::Validate | Command::Report);
    let v = validate(cfg, with_files)?;
    if with_files {
        out.put("validation.txt", validation_text(&v).as_bytes())?;
        out.put(
            "validation.json",
            serde_json::to_string_pretty(&v)?.as_bytes(),
        )?;
    }
    let mut outcome = Outcome {
        gates_passed: v.gates_passed,
        warnings: v.warnings.clone(),
        messages: v.failures.clone(),
        ..Outcome::default()
    };
    if !v.gates_passed || command == Command::Validate {
        outcome.files = out.files;
        return Ok(outcome);
    }

    match command {
        Command::Beta => {
            let (pts, src) = betas(cfg)?;
            out.put("beta.csv", beta_csv(&pts, src).as_bytes())?;
        }
        Command::Gamma => {
            let (curve, src) = gammas(cfg)?;
            out.put("gamma.csv", gamma_csv(&curve, src).as_bytes())?;
        }
        Command::Tau => {
            let (taus, table) = taus(cfg)?;
            out.put("tau.csv", tau_csv(&taus).as_bytes())?;
            out.put("moments.csv", moments_csv(&table).as_bytes())?;
        }
        Command::Report => {
            let (curve, src) = gammas(cfg)?;
            let (taus, table) = taus(cfg)?;
            out.put("report.csv", report_csv(&curve, src, &taus).as_bytes())?;
            out.put("moments.csv", moments_csv(&table).as_bytes())?;
            out.put(
                "summary.txt",
                summary_text(&v, &curve, src, &taus).as_bytes(),
            )?;
            out.put("attractor.ppm", &render_ppm(cfg)?)?;
        }
        Command::Validate | Command::Render => unreachable!("handled above"),
    }
    outcome.files = out.files;
    Ok(outcome)
}
