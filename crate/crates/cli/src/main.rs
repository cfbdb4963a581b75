//! `amlbfgs run <config>`: Monte Carlo comparison of the multi-batch L-BFGS
//! variants and Adam, driven by a TOML experiment file.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use amlbfgs::config::ExperimentConfig;
use amlbfgs::data::load_csv;
use amlbfgs::harness::monte_carlo;
use amlbfgs::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amlbfgs", version, about = "Adaptive-memory multi-batch L-BFGS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Validate and print the resolved config without training.
        #[arg(long)]
        dry_run: bool,
        /// Override `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes with their process exit codes.
enum Failure {
    Config(String),
    Abort(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Abort(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Abort(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Io(_) | Error::DatasetNotFound(_) => Failure::Io(err.to_string()),
            Error::Numeric { .. } | Error::NonFinite(_) | Error::CorruptStore { .. } => Failure::Abort(err.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, err: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {err}", path.display()))
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    if let Some(out) = out {
        config.run.output_dir = out;
    }
    // relative dataset paths are relative to the config file
    if config.dataset.path.is_relative() {
        let base = path.parent().unwrap_or(Path::new(""));
        config.dataset.path = base.join(&config.dataset.path);
    }
    if let Ok(abs) = config.dataset.path.canonicalize() {
        config.dataset.path = abs;
    }
    // TOML integers are signed 64-bit; keep the manifest writable
    for (field, v) in [
        ("run.seed", Some(config.run.seed)),
        ("run.split_seed", config.run.split_seed),
    ] {
        if v.is_some_and(|v| v > i64::MAX as u64) {
            return Err(Failure::Config(format!(
                "invalid config `{field}`: must not exceed {}",
                i64::MAX
            )));
        }
    }
    config.validate()?;
    Ok(config)
}

fn run(config_path: &Path, dry_run: bool, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(config_path, seed, out)?;
    if dry_run {
        let text = output::manifest(&config).map_err(|e| Failure::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }

    let dataset = load_csv(&config.dataset.path, &config.dataset.csv_options()?)?;
    eprintln!(
        "loaded {} rows, {} features, {} classes from {}",
        dataset.len(),
        dataset.n_features,
        dataset.class_count,
        config.dataset.path.display()
    );
    let started = Instant::now();
    let report = monte_carlo(&dataset, &config)?;
    eprintln!(
        "{} repetitions x {} methods in {:.1?}",
        config.run.repetitions,
        config.run.methods.len(),
        started.elapsed()
    );

    let dir = &config.run.output_dir;
    let written = output::write_outputs(dir, &config, &report).map_err(|e| io_failure(dir, e))?;
    print!("{}", output::format_table(&report.table));
    eprintln!("wrote {} files to {}", written.len(), dir.display());

    let aborted: Vec<String> = report
        .runs
        .iter()
        .flatten()
        .filter_map(|r| {
            r.abort
                .as_ref()
                .map(|a| format!("{} repetition {}: {}", r.method, r.repetition, a.reason))
        })
        .collect();
    if aborted.is_empty() {
        Ok(())
    } else {
        Err(Failure::Abort(format!(
            "{} run(s) aborted:\n  {}",
            aborted.len(),
            aborted.join("\n  ")
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            dry_run,
            seed,
            out,
        } => run(&config, dry_run, seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
