//! Files written after a run: per-run traces, the aggregate table and a
//! manifest that can be fed back in as a config.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use amlbfgs::config::ExperimentConfig;
use amlbfgs::harness::{AggregateTable, MonteCarloReport};
use amlbfgs::optim::IterationRecord;
use amlbfgs::train::{AbortRecord, RunResult};
use serde::Serialize;

pub const TRACE_HEADER: &str = "k,C_k,v_k,test_loss,ccr,m_k,q_k";

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.decimals$}"))
}

/// One CSV row per kept iteration. Every `every`-th iteration is kept,
/// plus the last one.
pub fn format_trace(history: &[IterationRecord], every: usize) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let last = history.len().saturating_sub(1);
    for (i, h) in history.iter().enumerate() {
        if i % every != 0 && i != last {
            continue;
        }
        let _ = writeln!(
            out,
            "{},{:.10},{},{},{},{},{}",
            h.k,
            h.train_loss,
            opt(h.validation_loss, 10),
            opt(h.test_loss, 10),
            opt(h.test_ccr, 4),
            h.memory,
            h.stored_pairs
        );
    }
    out
}

pub fn trace_file_name(run: &RunResult) -> String {
    format!("{}_rep{:03}.csv", run.method.name().to_lowercase(), run.repetition)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    method: &'a str,
    repetition: usize,
    split_seed: u64,
    final_ccr: Option<f64>,
    final_test_loss: Option<f64>,
    final_memory: usize,
    trace: String,
    abort: Option<&'a AbortRecord>,
}

#[derive(Serialize)]
struct Aggregate<'a> {
    seed: u64,
    table: &'a AggregateTable,
    runs: Vec<RunSummary<'a>>,
}

/// Writes everything under `dir`; returns the paths written.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, report: &MonteCarloReport) -> io::Result<Vec<PathBuf>> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    let mut written = Vec::new();
    let mut runs = Vec::new();
    for run in report.runs.iter().flatten() {
        let name = trace_file_name(run);
        let path = traces.join(&name);
        fs::write(&path, format_trace(&run.history, config.run.trace_every))?;
        written.push(path);
        runs.push(RunSummary {
            method: run.method.name(),
            repetition: run.repetition,
            split_seed: config.split_seed_for(run.repetition),
            final_ccr: run.final_ccr,
            final_test_loss: run.final_test_loss,
            final_memory: run.history.last().map_or(0, |h| h.memory),
            trace: format!("traces/{name}"),
            abort: run.abort.as_ref(),
        });
    }

    let aggregate = Aggregate {
        seed: config.run.seed,
        table: &report.table,
        runs,
    };
    let path = dir.join("aggregate.json");
    let json = serde_json::to_string_pretty(&aggregate).map_err(io::Error::other)?;
    fs::write(&path, json + "\n")?;
    written.push(path);

    let path = dir.join("manifest.toml");
    fs::write(&path, manifest(config).map_err(io::Error::other)?)?;
    written.push(path);
    Ok(written)
}

/// The resolved config as TOML, preceded by comments giving the split
/// seed(s) actually used.
pub fn manifest(config: &ExperimentConfig) -> Result<String, toml::ser::Error> {
    let mut out = String::from("# resolved configuration; valid input for `amlbfgs run`\n");
    if config.run.resplit_each_repetition {
        let _ = writeln!(out, "# split seeds by repetition:");
        for rep in 0..config.run.repetitions {
            let _ = writeln!(out, "#   {rep}: {}", config.split_seed_for(rep));
        }
    } else {
        let _ = writeln!(out, "# split seed {} for every repetition", config.split_seed_for(0));
    }
    out.push('\n');
    out.push_str(&toml::to_string_pretty(config)?);
    Ok(out)
}

/// Table-3 style summary: `mean(std)` of CCR and rank per method.
pub fn format_table(table: &AggregateTable) -> String {
    let mut out = format!("{:<8} {:>14} {:>12} {:>8}\n", "method", "CCR", "RNK", "aborted");
    for row in &table.rows {
        let cell = |m: Option<amlbfgs::metrics::MeanStd>, d: usize| {
            m.map_or_else(|| "n/a".to_string(), |m| format!("{:.d$}({:.d$})", m.mean, m.std))
        };
        let _ = writeln!(
            out,
            "{:<8} {:>14} {:>12} {:>8}",
            row.method.name(),
            cell(row.ccr, 1),
            cell(row.rnk, 2),
            row.aborted
        );
    }
    out
}
