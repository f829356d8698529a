use std::path::PathBuf;
use std::process::ExitCode;

use bmfix_core::config::parse_config;
use bmfix_core::report::{emit_report, write_file, Format};
use bmfix_core::runner::{execute, Command, ExecOptions};
use clap::{Parser, Subcommand};

/// Fixed-point iteration and Cauchy-argument checks in b-metric spaces.
#[derive(Debug, Parser)]
#[command(name = "bmfix", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Configuration document.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override run.seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Override run.samples (axiom triples).
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,

    /// Override run.epsilons; repeat for several values.
    #[arg(long = "epsilon", global = true, value_name = "X")]
    epsilons: Vec<f64>,

    /// Override run.horizon (multiples of n_tilde).
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<usize>,

    #[arg(long, global = true, default_value = "json", value_parser = parse_format)]
    format: Format,

    /// Write the per-iteration CSV trace here.
    #[arg(long, global = true, value_name = "PATH")]
    trace: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Add wall-clock timing to the report (makes output run-dependent).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Sample the b-metric axioms of the configured space.
    CheckSpace,
    /// Check monotonicity, phi(t) < t and iterate decay of phi.
    CheckPhi,
    /// Sample the contraction inequality of the configured map.
    CheckMap,
    /// Solve for the fixed point and check uniqueness across starts.
    Solve,
    /// Build and verify the witness indices for every epsilon.
    Witness,
    /// Every stage in order.
    Full,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

const USAGE_ERROR: u8 = 2;

fn run(cli: Cli) -> Result<u8, String> {
    let path = cli.config.ok_or("--config PATH is required")?;
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut raw = bmfix_core::config::RawConfig::parse(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        raw.run.seed = Some(seed);
    }
    if let Some(n) = cli.samples {
        raw.run.samples = Some(n);
    }
    if !cli.epsilons.is_empty() {
        raw.run.epsilons = cli.epsilons;
    }
    if let Some(h) = cli.horizon {
        raw.run.horizon = Some(h);
    }
    let config = raw.validate().map_err(|e| e.to_string())?;
    debug_assert_eq!(parse_config(&config.to_toml_string()).as_ref(), Ok(&config));

    let command = match cli.command {
        Cmd::CheckSpace => Command::CheckSpace,
        Cmd::CheckPhi => Command::CheckPhi,
        Cmd::CheckMap => Command::CheckMap,
        Cmd::Solve => Command::Solve,
        Cmd::Witness => Command::Witness,
        Cmd::Full => Command::Full,
    };
    let report = execute(&config, command, ExecOptions { timing: cli.timing });
    let rendered =
        emit_report(&report, cli.format, cli.trace.as_deref()).map_err(|e| e.to_string())?;
    match &cli.out {
        Some(p) => write_file(p, &rendered).map_err(|e| e.to_string())?,
        None => print!("{rendered}"),
    }
    Ok(report.verdict.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("bmfix: {msg}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}
