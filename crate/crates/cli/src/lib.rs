//! Command-line front end for the `cvtele` simulator.
//!
//! Subcommands compute their documents in memory ([`commands`]); [`run`]
//! parses arguments, resolves the configuration and writes the files.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::output::{Artifact, Format};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "CVTELE_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cvtele::Error),
    #[error("{0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 validation, 3 non-convergence, 4 sampler failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(cvtele::Error::NonConverged { .. }) => 3,
            CliError::Core(cvtele::Error::Sampler(_) | cvtele::Error::Underflow { .. }) => 4,
            CliError::Core(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cvtele",
    version,
    about = "Continuous-variable teleportation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Average fidelity and P(β), F(β) along a ray
    Fidelity(Overrides),
    /// Average fidelity for each q in --q-list
    SweepQ(Overrides),
    /// Monte Carlo teleportation shots
    Shots(Overrides),
    /// Verification statistics of input and teleported states
    Verify(Overrides),
    /// Completeness of the reference-state measurement basis
    PovmCheck(Overrides),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fidelity(_) => "fidelity",
            Command::SweepQ(_) => "sweep-q",
            Command::Shots(_) => "shots",
            Command::Verify(_) => "verify",
            Command::PovmCheck(_) => "povm-check",
        }
    }

    pub fn overrides(&self) -> &Overrides {
        match self {
            Command::Fidelity(o)
            | Command::SweepQ(o)
            | Command::Shots(o)
            | Command::Verify(o)
            | Command::PovmCheck(o) => o,
        }
    }
}

pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    match command {
        Command::Fidelity(_) => commands::cmd_fidelity(cfg),
        Command::SweepQ(_) => commands::cmd_sweep_q(cfg),
        Command::Shots(_) => commands::cmd_shots(cfg),
        Command::Verify(_) => commands::cmd_verify(cfg),
        Command::PovmCheck(_) => commands::cmd_povm_check(cfg),
    }
}

/// Target of the main document: `--out`, else `$CVTELE_OUT_DIR/<command>.<ext>`,
/// else standard output (`None`).
pub fn primary_path(command: &str, cfg: &RunConfig, out_dir: Option<&Path>) -> Option<PathBuf> {
    cfg.out
        .clone()
        .or_else(|| out_dir.map(|dir| dir.join(format!("{command}.{}", cfg.format.extension()))))
}

/// `runs/a.csv` with suffix `summary` and format JSON gives `runs/a.summary.json`.
pub fn companion_path(primary: &Path, suffix: &str, format: Format) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{stem}.{suffix}.{}", format.extension()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

pub fn write_artifacts(
    command: &str,
    cfg: &RunConfig,
    artifacts: &[Artifact],
    out_dir: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let primary = primary_path(command, cfg, out_dir);
    let mut written = Vec::new();
    for a in artifacts {
        let text = a.render(cfg.format);
        match (&primary, a.suffix) {
            (Some(p), None) => {
                write_file(p, &text)?;
                written.push(p.clone());
            }
            (Some(p), Some(suffix)) => {
                let path = companion_path(p, suffix, a.format_or(cfg.format));
                write_file(&path, &text)?;
                written.push(path);
            }
            (None, _) => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|source| CliError::Io {
                        path: "stdout".into(),
                        source,
                    })?;
            }
        }
    }
    Ok(written)
}

fn run_parsed(cli: &Cli) -> Result<(), CliError> {
    let overrides = cli.command.overrides();
    let cfg = overrides.resolve()?;
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let artifacts = match overrides.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?
            .install(|| execute(&cli.command, &cfg))?,
        None => execute(&cli.command, &cfg)?,
    };
    for path in write_artifacts(cli.command.name(), &cfg, &artifacts, out_dir.as_deref())? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_parsed(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
