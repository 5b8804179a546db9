//! `peakvalley`: solve, sweep, simulate and verify the peak/valley
//! consumption model from the command line.
//!
//! Exit codes: 0 on success, 1 on a runtime or convergence failure (including
//! a failing `verify`), 2 on invalid input.

mod commands;
mod config;
mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Format, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<peakvalley::Error> for CliError {
    fn from(e: peakvalley::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<peakvalley::ModelError> for CliError {
    fn from(e: peakvalley::ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "peakvalley", version, about = "Consumption and investment with peak and valley adjustment costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config with kebab-case keys; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Constants, coefficients, boundaries and the policy at (x, h1, h2).
    Solve,
    /// Boundaries, value and controls over a grid of one parameter.
    Sweep,
    /// Utility moments of the optimal policy against Merton's.
    Simulate,
    /// Long-run occupation and hitting statistics against closed forms.
    Longrun,
    /// Invariant suites; exits 1 if any check fails.
    Verify,
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.paths {
            cfg.n_paths = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, out: &commands::Output) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("cannot write output: {e}"));
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            out.table.write(cfg.format, cfg.precision, &mut w).map_err(io)?;
            w.flush().map_err(io)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            out.table.write(cfg.format, cfg.precision, &mut w).map_err(io)?;
        }
    }
    for line in &out.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    let out = match cli.command {
        Command::Solve => commands::solve(&cfg)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Longrun => commands::longrun(&cfg)?,
        Command::Verify => {
            let (out, failure) = commands::verify(&cfg)?;
            emit(&cfg, &out)?;
            return match failure {
                Some(f) => Err(CliError::Runtime(format!("verification failed at {f}"))),
                None => Ok(()),
            };
        }
    };
    emit(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
