use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use lqspec_cli::config::parse_config;
use lqspec_cli::pipeline::{run, Command};

/// Multifractal spectra of self-affine measures on the unit square.
#[derive(Parser)]
#[command(name = "lqspec", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check contraction, domination and the open set condition.
    Validate(Args),
    /// Draw the attractor with the chaos game.
    Render(Args),
    /// Spectrum of the horizontal projection.
    Beta(Args),
    /// Pressure root gamma(q).
    Gamma(Args),
    /// Mesh-moment slopes tau(q).
    Tau(Args),
    /// Everything above plus a comparison table.
    Report(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML system description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`, which is relative to
    /// the config file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Clap exits with 2 on usage errors, which is reserved for failed gates.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    let (command, args) = match cli.command {
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Render(a) => (Command::Render, a),
        Cmd::Beta(a) => (Command::Beta, a),
        Cmd::Gamma(a) => (Command::Gamma, a),
        Cmd::Tau(a) => (Command::Tau, a),
        Cmd::Report(a) => (Command::Report, a),
    };
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("in {}", args.config.display()))?;
    let out_dir = args
        .out
        .or_else(|| {
            let dir = cfg.output_dir.as_ref()?;
            let base = args.config.parent().unwrap_or(std::path::Path::new(""));
            Some(base.join(dir))
        })
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(&cfg, command, &out_dir)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for m in &outcome.messages {
        eprintln!("gate failed: {m}");
    }
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(outcome.exit_code() as u8)
}
