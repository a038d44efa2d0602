//! Parallel Monte-Carlo runs of the two-layer experiment.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use csymmpi::harness::{
    evaluate, render_markdown, run_rep, CoverageReport, ExperimentConfig, RepRecord,
};

pub fn load_experiment(path: Option<&Path>) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text)
                .map_err(|e| csymmpi::Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Runs every `(trial, rep)` task on the current rayon pool. Each task owns
/// its seed, so the records do not depend on the thread count.
pub fn run_simulation(config: &ExperimentConfig) -> Result<(Vec<RepRecord>, CoverageReport)> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.trials)
        .flat_map(|t| (0..config.reps).map(move |r| (t, r)))
        .collect();
    let batches: Vec<Vec<RepRecord>> = tasks
        .par_iter()
        .map(|&(t, r)| run_rep(config, t, r).with_context(|| format!("trial {t}, rep {r}")))
        .collect::<Result<_>>()?;
    let records: Vec<RepRecord> = batches.into_iter().flatten().collect();
    let report = evaluate(&records, config);
    Ok((records, report))
}

/// Builds a pool with `threads` workers; 0 lets rayon decide.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_report_csv(report: &CoverageReport, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(records: &[RepRecord], path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Coverage table followed by the multi-accuracy table.
pub fn render_full(report: &CoverageReport) -> String {
    let mut s = render_markdown(report);
    if !report.multi_accuracy.is_empty() {
        let _ = writeln!(s, "\n| Method | f | Estimate | SE |");
        let _ = writeln!(s, "|---|---|---|---|");
        for m in &report.multi_accuracy {
            let _ = writeln!(
                s,
                "| {} | {} | {:+.4} | {:.4} |",
                m.method.label(),
                m.function,
                m.estimate,
                m.standard_error
            );
        }
    }
    s
}
