//! Command-line front end for the experiment harness.
//!
//! Exit codes: 0 success, 1 I/O error or failed theory check, 2 a run
//! diverged, 3 bad configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cao::harness::{
    self, exit, read_experiment, render_threshold_sweep, threshold_sweep, time_to_threshold,
    ExperimentConfig, ExperimentOutcome,
};
use cao::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cao", version, about = "Curvature-adaptive optimizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every optimizer of a config on every seed and write logs and tables.
    Run {
        config: PathBuf,
        /// Overrides `log_dir` from the config.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Time-to-threshold table for an experiment directory (`<log_dir>/logs/<experiment>`).
    Ttt {
        experiment_dir: PathBuf,
        /// Thresholds to report; defaults to the one recorded in the logs.
        #[arg(long = "threshold", num_args = 1..)]
        thresholds: Vec<f64>,
    },
    /// Rank ablation over the CAO entry of a config.
    AblateK {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Damping and refresh-interval sweep over the CAO entry of a config.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ms: Option<Vec<u64>>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Mean/std loss curves per optimizer as TSV.
    Plotdata {
        experiment_dir: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the convergence-theory checks.
    Theory {
        /// Also write `<out>/theory/reports.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => exit::CONFIG,
                Error::Diverged { .. } => exit::DIVERGED,
                _ => exit::FAILURE,
            }
        }
    };
    ExitCode::from(code as u8)
}

/// Writes to stdout, ignoring a closed pipe (`cao ttt ... | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load(path: &Path, log_dir: Option<PathBuf>) -> cao::Result<ExperimentConfig> {
    // an unreadable config is a config problem, not an I/O failure of the run
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
        other => other,
    })?;
    if let Some(dir) = log_dir {
        cfg.log_dir = dir;
    }
    Ok(cfg)
}

fn report(outcome: &ExperimentOutcome, log_root: &Path) -> cao::Result<i32> {
    let dir = log_root.join("logs").join(&outcome.experiment);
    let logs = read_experiment(&dir)?;
    let cfg = &logs[0].header.config;
    emit(&time_to_threshold(&logs, cfg.threshold)?.render());
    for f in &outcome.summaries {
        emit(&format!("wrote {}\n", f.display()));
    }
    let diverged: Vec<_> = outcome.runs.iter().filter(|r| r.diverged).collect();
    for r in &diverged {
        eprintln!("diverged: {} seed {}", r.optimizer, r.seed);
    }
    Ok(if diverged.is_empty() { exit::SUCCESS } else { exit::DIVERGED })
}

fn dispatch(command: Command) -> cao::Result<i32> {
    match command {
        Command::Run { config, log_dir } => {
            let cfg = load(&config, log_dir)?;
            let outcome = harness::run_comparison(&cfg)?;
            report(&outcome, &cfg.log_dir)
        }
        Command::AblateK { config, ks, log_dir } => {
            let cfg = load(&config, log_dir)?;
            let mut grid = cfg.ablation.clone().unwrap_or_default();
            if let Some(ks) = ks {
                grid.ks = ks;
            }
            let outcome = harness::k_ablation(&cfg, &grid)?;
            report(&outcome, &cfg.log_dir)
        }
        Command::Sweep { config, etas, ms, log_dir } => {
            let cfg = load(&config, log_dir)?;
            let mut grid = cfg.sweep.clone().unwrap_or_default();
            if let Some(etas) = etas {
                grid.etas = etas;
            }
            if let Some(ms) = ms {
                grid.ms = ms;
            }
            let outcome = harness::sensitivity_sweep(&cfg, &grid)?;
            report(&outcome, &cfg.log_dir)
        }
        Command::Ttt { experiment_dir, thresholds } => {
            let logs = read_experiment(&experiment_dir)?;
            let thresholds =
                if thresholds.is_empty() { vec![logs[0].header.config.threshold] } else { thresholds };
            if thresholds.len() == 1 {
                emit(&time_to_threshold(&logs, thresholds[0])?.render());
            } else {
                emit(&render_threshold_sweep(&threshold_sweep(&logs, &thresholds)?));
            }
            Ok(exit::SUCCESS)
        }
        Command::Plotdata { experiment_dir, out } => {
            let logs = read_experiment(&experiment_dir)?;
            let tsv = harness::emit_plot_data(&logs)?;
            match out {
                Some(path) => std::fs::write(&path, tsv).map_err(|e| Error::Io { path, source: e })?,
                None => emit(&tsv),
            }
            Ok(exit::SUCCESS)
        }
        Command::Theory { out } => {
            let reports = cao::theory::run_suite(out.as_deref())?;
            let mut all = true;
            for r in &reports {
                emit(&format!("{} {}\n", if r.pass { "PASS" } else { "FAIL" }, r.check));
                all &= r.pass;
            }
            Ok(if all { exit::SUCCESS } else { exit::FAILURE })
        }
    }
}
