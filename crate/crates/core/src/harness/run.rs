use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{AblationGrid, ExperimentConfig, StepRule, SweepGrid};
use super::log::{LogLine, LogWriter, RunEnd, RunHeader, LOG_FORMAT, LOG_VERSION};
use super::summarize;
use crate::error::{Error, Result};
use crate::optimizer::{BatchSchedule, CaoConfig, Optimizer, OptimizerConfig};
use crate::problems::{Batch, Problem};

/// Result of one `(optimizer, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub path: PathBuf,
    pub optimizer: String,
    pub seed: u64,
    pub steps: u64,
    pub diverged: bool,
    pub hvps: u64,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub experiment: String,
    pub runs: Vec<RunOutcome>,
    /// Summary and plot-data files regenerated from the logs.
    pub summaries: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().any(|r| r.diverged)
    }
}

#[derive(Debug, Clone)]
struct Job {
    optimizer: String,
    index: usize,
    config: OptimizerConfig,
    seed: u64,
}

pub fn log_path(log_root: &Path, experiment: &str, optimizer: &str, seed: u64) -> PathBuf {
    log_root.join("logs").join(experiment).join(optimizer).join(format!("{seed}.log"))
}

/// Every configured optimizer on every seed. Within a seed all optimizers
/// consume the same batch schedule and start from the same point.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut jobs = Vec::new();
    for seed in &cfg.seeds {
        for (index, o) in cfg.optimizers.iter().enumerate() {
            jobs.push(Job { optimizer: o.name.clone(), index, config: o.config.clone(), seed: *seed });
        }
    }
    run_jobs(cfg, &cfg.name, jobs)
}

/// The first `cao` optimizer at each rank in `ks`, under experiment
/// `<name>-ablate-k` with optimizer names `cao-k<k>`.
pub fn k_ablation(cfg: &ExperimentConfig, grid: &AblationGrid) -> Result<ExperimentOutcome> {
    let (_, base) = cfg.base_cao()?;
    let problem = cfg.problem.build()?;
    let mut jobs = Vec::new();
    for seed in &cfg.seeds {
        for (index, &k) in grid.ks.iter().enumerate() {
            let mut c = CaoConfig { k, seed: *seed, ..base.clone() };
            if grid.step_rule == StepRule::Effective {
                let theta0 = problem.initial_point(*seed);
                c.alpha = crate::theory::effective_stepsize(problem.as_ref(), &theta0, &c, grid.step_scale)
                    .map_err(|e| Error::Config(format!("effective stepsize for k = {k}: {e}")))?;
            }
            c.validate()?;
            jobs.push(Job {
                optimizer: format!("cao-k{k}"),
                index,
                config: OptimizerConfig::Cao(c),
                seed: *seed,
            });
        }
    }
    run_jobs(cfg, &format!("{}-ablate-k", cfg.name), jobs)
}

/// The first `cao` optimizer over an `η × m` grid, under experiment
/// `<name>-sweep` with optimizer names `cao-eta<η>-m<m>`.
pub fn sensitivity_sweep(cfg: &ExperimentConfig, grid: &SweepGrid) -> Result<ExperimentOutcome> {
    let (_, base) = cfg.base_cao()?;
    let mut jobs = Vec::new();
    for seed in &cfg.seeds {
        let mut index = 0;
        for &eta in &grid.etas {
            for &m in &grid.ms {
                let c = CaoConfig { eta, m, ..base.clone() };
                c.validate()?;
                jobs.push(Job {
                    optimizer: format!("cao-eta{eta:e}-m{m}"),
                    index,
                    config: OptimizerConfig::Cao(c),
                    seed: *seed,
                });
                index += 1;
            }
        }
    }
    run_jobs(cfg, &format!("{}-sweep", cfg.name), jobs)
}

fn run_jobs(cfg: &ExperimentConfig, experiment: &str, jobs: Vec<Job>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    let exp_dir = cfg.log_dir.join("logs").join(experiment);
    if exp_dir.exists() {
        // stale runs from an earlier grid would leak into the summaries
        std::fs::remove_dir_all(&exp_dir).map_err(|e| Error::io(&exp_dir, e))?;
    }
    let runs: Vec<RunOutcome> =
        jobs.par_iter().map(|job| execute(cfg, experiment, problem.as_ref(), job)).collect::<Result<_>>()?;
    let summaries = summarize(&cfg.log_dir, experiment)?;
    Ok(ExperimentOutcome { experiment: experiment.to_string(), runs, summaries })
}

fn execute(cfg: &ExperimentConfig, experiment: &str, problem: &dyn Problem, job: &Job) -> Result<RunOutcome> {
    let mut opt_cfg = job.config.clone();
    if let OptimizerConfig::Cao(c) = &mut opt_cfg {
        c.seed = job.seed;
    }
    let schedule = BatchSchedule::new(problem.num_samples(), cfg.batch_size, job.seed);
    let batches = schedule.batches(cfg.steps);
    let path = log_path(&cfg.log_dir, experiment, &job.optimizer, job.seed);
    let header = RunHeader {
        format: LOG_FORMAT.into(),
        version: LOG_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        experiment: experiment.into(),
        optimizer: job.optimizer.clone(),
        optimizer_index: job.index,
        optimizer_config: opt_cfg.clone(),
        seed: job.seed,
        steps_per_epoch: schedule.steps_per_epoch(),
        schedule_hash: schedule.fingerprint(cfg.steps),
        config: cfg.clone(),
    };
    let mut log = LogWriter::create(&path, header)?;

    let started = Instant::now();
    let clock = || {
        if cfg.record_wall_clock {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };
    let full = Batch::full();
    let mut opt = opt_cfg.build();
    let mut theta = problem.initial_point(job.seed);
    let f0 = problem.loss(&theta, &full)?;
    let limit = cfg.divergence_factor * f0.abs().max(1.0);
    let mut diverged = false;
    let last = batches.len() - 1;
    for (i, (epoch, batch)) in batches.iter().enumerate() {
        let due = i % cfg.eval_every == 0 || i == last;
        let eval = if due && !batch.is_full() { Some(problem.eval_loss(&theta, &full)) } else { None };
        let mut rec = match opt.step(problem, &mut theta, batch) {
            Ok(r) => r,
            Err(Error::Diverged { record, .. }) => {
                let mut rec = *record;
                rec.epoch = *epoch;
                rec.wall_clock = clock();
                log.write(&LogLine::Step(rec))?;
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        rec.epoch = *epoch;
        if due {
            rec.eval_loss = if batch.is_full() { Some(rec.loss) } else { eval };
        }
        rec.wall_clock = clock();
        let blown = |x: f64| !x.is_finite() || x > limit;
        let bad = blown(rec.loss) || rec.eval_loss.is_some_and(blown);
        log.write(&LogLine::Step(rec))?;
        if bad {
            diverged = true;
            break;
        }
    }
    let final_loss = if diverged {
        None
    } else {
        match problem.eval_loss(&theta, &full) {
            l if l.is_finite() && l <= limit => Some(l),
            _ => {
                diverged = true;
                None
            }
        }
    };
    let end =
        RunEnd { steps: opt.steps_taken(), diverged, hvps: opt.hvp_count(), final_loss, wall_clock: clock() };
    log.write(&LogLine::End(end.clone()))?;
    log.finish()?;
    Ok(RunOutcome {
        path,
        optimizer: job.optimizer.clone(),
        seed: job.seed,
        steps: end.steps,
        diverged,
        hvps: end.hvps,
        final_loss,
    })
}
