//! Stepping loops sharing one interface: the curvature-adaptive optimizer
//! ([`Cao`]) and the SGD-momentum / Adam baselines.
//!
//! All three add weight decay to the gradient before anything else and clip
//! the final update direction, so trajectories differ only in how the
//! direction is formed.

mod baselines;
mod cao;
mod checkpoint;
mod schedule;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::problems::{Batch, ParamVector, Problem};

pub use baselines::{Adam, AdamConfig, Sgd, SgdConfig};
pub use cao::{Cao, CaoConfig, SketchBatch, ZeroRankMode};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use schedule::BatchSchedule;

/// One optimizer update, as written to run logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step index before the update (0-based).
    pub step: u64,
    pub epoch: u64,
    /// Batch loss at the pre-update parameters.
    pub loss: f64,
    /// Norm of the gradient including weight decay.
    pub grad_norm: f64,
    /// `‖θ_{t+1} − θ_t‖`.
    pub update_norm: f64,
    pub refreshed: bool,
    pub sketch_eigvals: Vec<f64>,
    /// A sketch direction had its denominator floored.
    pub clamped: bool,
    /// The current sketch holds a negative Ritz value.
    pub negative_curvature: bool,
    /// Cumulative HVP count for the run.
    pub hvps: u64,
    /// Full-data loss at the pre-update parameters, on evaluation steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_loss: Option<f64>,
    /// Seconds since the run started; 0 when timing is disabled.
    pub wall_clock: f64,
}

impl StepRecord {
    pub(crate) fn new(step: u64, loss: f64, grad_norm: f64) -> Self {
        StepRecord {
            step,
            epoch: 0,
            loss,
            grad_norm,
            update_norm: 0.0,
            refreshed: false,
            sketch_eigvals: Vec::new(),
            clamped: false,
            negative_curvature: false,
            hvps: 0,
            eval_loss: None,
            wall_clock: 0.0,
        }
    }
}

/// Common stepping interface.
pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Number of updates applied so far.
    fn steps_taken(&self) -> u64;

    fn hvp_count(&self) -> u64 {
        0
    }

    /// Applies one update to `theta` using `batch`.
    fn step(&mut self, problem: &dyn Problem, theta: &mut ParamVector, batch: &Batch) -> Result<StepRecord>;
}

/// `g + wd·θ`.
pub(crate) fn decayed_gradient(mut g: ParamVector, theta: &[f64], weight_decay: f64) -> ParamVector {
    if weight_decay != 0.0 {
        linalg::axpy(weight_decay, theta, &mut g);
    }
    g
}

/// `d ← min(1, c/‖d‖)·d` when `c > 0`.
pub fn clip_direction(d: &mut [f64], clip_c: f64) {
    if clip_c > 0.0 {
        let factor = (clip_c / linalg::norm(d)).min(1.0);
        if factor < 1.0 {
            linalg::scale(factor, d);
        }
    }
}

/// `θ ← θ − lr·d`, returning `‖lr·d‖`.
pub(crate) fn apply_update(theta: &mut [f64], lr: f64, d: &[f64]) -> f64 {
    let mut sq = 0.0;
    for (t, di) in theta.iter_mut().zip(d) {
        let delta = lr * di;
        *t -= delta;
        sq += delta * delta;
    }
    sq.sqrt()
}

/// Fetches loss and gradient, turning a non-finite evaluation into a
/// divergence error that carries a diagnostic record.
pub(crate) fn loss_and_grad(
    problem: &dyn Problem,
    theta: &[f64],
    batch: &Batch,
    step: u64,
) -> Result<(f64, ParamVector)> {
    match problem.loss_grad(theta, batch) {
        Ok(v) => Ok(v),
        Err(crate::Error::NonFinite { .. }) => {
            let raw = problem.eval_loss(theta, batch);
            Err(crate::Error::Diverged { step, record: Box::new(StepRecord::new(step, raw, f64::NAN)) })
        }
        Err(e) => Err(e),
    }
}

/// Optimizer configuration, tagged by `kind` in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Cao(CaoConfig),
    Sgd(SgdConfig),
    Adam(AdamConfig),
}

impl OptimizerConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            OptimizerConfig::Cao(_) => "cao",
            OptimizerConfig::Sgd(_) => "sgd",
            OptimizerConfig::Adam(_) => "adam",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Cao(c) => c.validate(),
            OptimizerConfig::Sgd(c) => c.validate(),
            OptimizerConfig::Adam(c) => c.validate(),
        }
    }

    pub fn build(&self) -> AnyOptimizer {
        match self {
            OptimizerConfig::Cao(c) => AnyOptimizer::Cao(Cao::new(c.clone())),
            OptimizerConfig::Sgd(c) => AnyOptimizer::Sgd(Sgd::new(c.clone())),
            OptimizerConfig::Adam(c) => AnyOptimizer::Adam(Adam::new(c.clone())),
        }
    }
}

/// Closed set of optimizers, used for dispatch and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyOptimizer {
    Cao(Cao),
    Sgd(Sgd),
    Adam(Adam),
}

impl Optimizer for AnyOptimizer {
    fn name(&self) -> &'static str {
        match self {
            AnyOptimizer::Cao(o) => o.name(),
            AnyOptimizer::Sgd(o) => o.name(),
            AnyOptimizer::Adam(o) => o.name(),
        }
    }

    fn steps_taken(&self) -> u64 {
        match self {
            AnyOptimizer::Cao(o) => o.steps_taken(),
            AnyOptimizer::Sgd(o) => o.steps_taken(),
            AnyOptimizer::Adam(o) => o.steps_taken(),
        }
    }

    fn hvp_count(&self) -> u64 {
        match self {
            AnyOptimizer::Cao(o) => o.hvp_count(),
            AnyOptimizer::Sgd(o) => o.hvp_count(),
            AnyOptimizer::Adam(o) => o.hvp_count(),
        }
    }

    fn step(&mut self, problem: &dyn Problem, theta: &mut ParamVector, batch: &Batch) -> Result<StepRecord> {
        match self {
            AnyOptimizer::Cao(o) => o.step(problem, theta, batch),
            AnyOptimizer::Sgd(o) => o.step(problem, theta, batch),
            AnyOptimizer::Adam(o) => o.step(problem, theta, batch),
        }
    }
}

/// Applies one step per batch, in order, tagging records with `epoch`.
pub fn run_epoch<O: Optimizer + ?Sized>(
    opt: &mut O,
    problem: &dyn Problem,
    theta: &mut ParamVector,
    batches: &[Batch],
    epoch: u64,
) -> Result<Vec<StepRecord>> {
    let mut records = Vec::with_capacity(batches.len());
    for batch in batches {
        let mut rec = match opt.step(problem, theta, batch) {
            Ok(r) => r,
            Err(crate::Error::Diverged { step, mut record }) => {
                record.epoch = epoch;
                return Err(crate::Error::Diverged { step, record });
            }
            Err(e) => return Err(e),
        };
        rec.epoch = epoch;
        records.push(rec);
    }
    Ok(records)
}

/// SplitMix64 finalizer, used to derive independent per-event seeds.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_contract() {
        let mut d = vec![3.0, 4.0];
        clip_direction(&mut d, 1.0);
        assert!((linalg::norm(&d) - 1.0).abs() < 1e-15);
        let mut small = vec![0.3, 0.4];
        clip_direction(&mut small, 1.0);
        assert_eq!(small, vec![0.3, 0.4]);
        let mut zero = vec![0.0, 0.0];
        clip_direction(&mut zero, 1.0);
        assert_eq!(zero, vec![0.0, 0.0]);
        let mut off = vec![30.0, 40.0];
        clip_direction(&mut off, 0.0);
        assert_eq!(off, vec![30.0, 40.0]);
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
        assert_eq!(mix_seed(5, 9), mix_seed(5, 9));
    }
}
