use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, StepRecord};

pub const LOG_FORMAT: &str = "cao-runlog";
pub const LOG_VERSION: u32 = 1;

/// First line of every run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    pub experiment: String,
    pub optimizer: String,
    /// Column position of this optimizer in tables and plot data.
    pub optimizer_index: usize,
    pub optimizer_config: OptimizerConfig,
    pub seed: u64,
    pub steps_per_epoch: usize,
    /// SHA-256 of the batch index stream this run consumed.
    pub schedule_hash: String,
    pub config: ExperimentConfig,
}

/// Last line of a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnd {
    pub steps: u64,
    pub diverged: bool,
    pub hvps: u64,
    /// Full-data loss after the final update (absent after divergence).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(Box<RunHeader>),
    Step(StepRecord),
    End(RunEnd),
}

/// Append-only line writer for one run.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path, header: RunHeader) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = LogWriter { path: path.to_path_buf(), out: BufWriter::new(file) };
        w.write(&LogLine::Header(Box::new(header)))?;
        Ok(w)
    }

    pub fn write(&mut self, line: &LogLine) -> Result<()> {
        let text = serde_json::to_string(line)
            .map_err(|e| Error::Format { path: self.path.clone(), message: e.to_string() })?;
        writeln!(self.out, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// A parsed run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub path: PathBuf,
    pub header: RunHeader,
    pub steps: Vec<StepRecord>,
    /// `None` when the run was interrupted.
    pub end: Option<RunEnd>,
}

impl RunLog {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let fmt = |m: String| Error::Format { path: path.to_path_buf(), message: m };
        let mut header = None;
        let mut steps = Vec::new();
        let mut end = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogLine =
                serde_json::from_str(&line).map_err(|e| fmt(format!("line {}: {e}", i + 1)))?;
            match (rec, header.is_some(), end.is_some()) {
                (LogLine::Header(h), false, _) => {
                    if h.format != LOG_FORMAT || h.version != LOG_VERSION {
                        return Err(fmt(format!("unsupported log {} v{}", h.format, h.version)));
                    }
                    header = Some(*h);
                }
                (_, _, true) => return Err(fmt(format!("line {}: record after end", i + 1))),
                (LogLine::Step(s), true, false) => steps.push(s),
                (LogLine::End(e), true, false) => end = Some(e),
                _ => return Err(fmt(format!("line {}: header missing or repeated", i + 1))),
            }
        }
        let header = header.ok_or_else(|| fmt("empty log".into()))?;
        Ok(RunLog { path: path.to_path_buf(), header, steps, end })
    }

    pub fn diverged(&self) -> bool {
        self.end.as_ref().is_some_and(|e| e.diverged)
    }

    /// `(step, epoch, full-data loss)` on evaluation steps.
    pub fn eval_series(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        self.steps.iter().filter_map(|s| s.eval_loss.map(|l| (s.step, s.epoch, l)))
    }

    /// Last recorded full-data loss: the end record's, else the last evaluation.
    pub fn final_loss(&self) -> Option<f64> {
        self.end.as_ref().and_then(|e| e.final_loss).or_else(|| self.eval_series().last().map(|(_, _, l)| l))
    }
}

/// Reads every `<optimizer>/<seed>.log` under an experiment directory, ordered
/// by optimizer position then seed.
pub fn read_experiment(dir: &Path) -> Result<Vec<RunLog>> {
    let mut logs = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let opt_dir = entry.map_err(|e| Error::io(dir, e))?.path();
        if !opt_dir.is_dir() {
            continue;
        }
        for f in std::fs::read_dir(&opt_dir).map_err(|e| Error::io(&opt_dir, e))? {
            let p = f.map_err(|e| Error::io(&opt_dir, e))?.path();
            if p.extension().is_some_and(|x| x == "log") {
                logs.push(RunLog::read(&p)?);
            }
        }
    }
    if logs.is_empty() {
        return Err(Error::Contract(format!("no run logs under {}", dir.display())));
    }
    logs.sort_by(|a, b| {
        (a.header.optimizer_index, &a.header.optimizer, a.header.seed).cmp(&(
            b.header.optimizer_index,
            &b.header.optimizer,
            b.header.seed,
        ))
    });
    Ok(logs)
}
