//! Experiment runner: seeded multi-optimizer comparisons, rank ablations,
//! damping/refresh sweeps, and tables and plot data regenerated from logs.
//!
//! Output layout under `log_dir`:
//!
//! ```text
//! logs/<experiment>/<optimizer>/<seed>.log   one JSON record per line
//! tables/<experiment>/{ttt,thresholds,summary,cost}.md
//! figures-data/<experiment>/loss.tsv
//! theory/reports.jsonl
//! ```

mod config;
mod log;
mod plot;
mod run;
mod tables;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use config::{AblationGrid, ExperimentConfig, NamedOptimizer, StepRule, SweepGrid};
pub use log::{read_experiment, LogLine, LogWriter, RunEnd, RunHeader, RunLog, LOG_FORMAT, LOG_VERSION};
pub use plot::emit_plot_data;
pub use run::{k_ablation, log_path, run_comparison, sensitivity_sweep, ExperimentOutcome, RunOutcome};
pub use tables::{
    first_hit, fmt_speedup, render_cost, render_summary, render_threshold_sweep, run_summary,
    threshold_sweep, time_to_threshold, Stat, SummaryRow, TtfRow, TtfTable,
};

/// Process exit codes used by the command-line tool.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// I/O failures and failed theory checks.
    pub const FAILURE: i32 = 1;
    pub const DIVERGED: i32 = 2;
    pub const CONFIG: i32 = 3;
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Rebuilds every table and plot-data file of `experiment` from its logs.
/// Thresholds come from the configuration recorded in the log headers.
pub fn summarize(log_root: &Path, experiment: &str) -> Result<Vec<PathBuf>> {
    let logs = read_experiment(&log_root.join("logs").join(experiment))?;
    let cfg = &logs[0].header.config;
    let tables = log_root.join("tables").join(experiment);
    let mut written = Vec::new();
    let ttt = time_to_threshold(&logs, cfg.threshold)?;
    written.push(write_file(&tables.join("ttt.md"), &ttt.render())?);
    if !cfg.thresholds.is_empty() {
        let sweep = threshold_sweep(&logs, &cfg.thresholds)?;
        written.push(write_file(&tables.join("thresholds.md"), &render_threshold_sweep(&sweep))?);
    }
    let summary = run_summary(&logs, cfg.threshold)?;
    written.push(write_file(&tables.join("summary.md"), &render_summary(&summary, cfg.threshold))?);
    written.push(write_file(&tables.join("cost.md"), &render_cost(&logs)?)?);
    let plot = emit_plot_data(&logs)?;
    let fig = log_root.join("figures-data").join(experiment).join("loss.tsv");
    written.push(write_file(&fig, &plot)?);
    Ok(written)
}
