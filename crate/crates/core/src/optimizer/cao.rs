use serde::{Deserialize, Serialize};

use super::{apply_update, clip_direction, decayed_gradient, loss_and_grad, mix_seed, Optimizer, StepRecord};
use crate::error::{Error, Result};
use crate::linalg;
use crate::precondition::{DampedPreconditioner, DEFAULT_FLOOR};
use crate::problems::{Batch, ParamVector, Problem};
use crate::sketch::{block_lanczos, LanczosConfig, Sketch};

/// Direction used when the rank is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRankMode {
    /// `d = g`: the loop degenerates to plain (clipped, decayed) gradient descent.
    #[default]
    Identity,
    /// `d = g/η`: the empty-sketch preconditioner.
    EtaScaled,
}

/// Which batch the sketch HVPs are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchBatch {
    /// The minibatch of the step that triggers the refresh.
    #[default]
    Current,
    /// The full data set.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaoConfig {
    /// Base learning rate.
    pub alpha: f64,
    /// Sketch rank.
    pub k: usize,
    /// Refresh interval in steps.
    pub m: u64,
    /// Damping.
    pub eta: f64,
    /// Update clip threshold; 0 disables clipping.
    pub clip_c: f64,
    pub weight_decay: f64,
    /// Subspace-iteration sweeps per refresh.
    pub t_pow: usize,
    /// Plain-gradient steps before the first refresh.
    pub warm_steps: u64,
    /// Smallest allowed preconditioner denominator.
    pub floor: f64,
    pub seed: u64,
    pub k0_mode: ZeroRankMode,
    pub sketch_batch: SketchBatch,
    pub reorth: bool,
}

impl Default for CaoConfig {
    fn default() -> Self {
        CaoConfig {
            alpha: 0.01,
            k: 1,
            m: 400,
            eta: 0.1,
            clip_c: 0.0,
            weight_decay: 0.0,
            t_pow: 10,
            warm_steps: 0,
            floor: DEFAULT_FLOOR,
            seed: 0,
            k0_mode: ZeroRankMode::Identity,
            sketch_batch: SketchBatch::Current,
            reorth: true,
        }
    }
}

impl CaoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("cao alpha must be positive, got {}", self.alpha));
        }
        if self.m == 0 {
            return bad("cao refresh interval m must be >= 1".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("cao eta must be positive, got {}", self.eta));
        }
        if !(self.clip_c >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("cao clip_c and weight_decay must be >= 0".into());
        }
        if self.t_pow == 0 {
            return bad("cao t_pow must be >= 1".into());
        }
        if !(self.floor > 0.0) {
            return bad("cao floor must be positive".into());
        }
        Ok(())
    }
}

/// Curvature-adaptive optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cao {
    pub config: CaoConfig,
    step: u64,
    sketch: Option<Sketch>,
    hvp_count: u64,
    refreshes: u64,
    refresh_failures: u64,
}

impl Cao {
    pub fn new(config: CaoConfig) -> Self {
        Cao { config, step: 0, sketch: None, hvp_count: 0, refreshes: 0, refresh_failures: 0 }
    }

    pub fn sketch(&self) -> Option<&Sketch> {
        self.sketch.as_ref()
    }

    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn refresh_failures(&self) -> u64 {
        self.refresh_failures
    }

    fn refresh_due(&self) -> bool {
        let c = &self.config;
        c.k > 0 && (self.step.is_multiple_of(c.m) || self.sketch.is_none()) && self.step >= c.warm_steps
    }

    /// Seed for the refresh happening at `step`.
    pub fn refresh_seed(&self, step: u64) -> u64 {
        mix_seed(self.config.seed, step)
    }

    /// Recomputes the sketch at `theta`. A non-finite HVP keeps the old sketch.
    fn refresh(&mut self, problem: &dyn Problem, theta: &[f64], batch: &Batch) -> Result<bool> {
        let sketch_batch = match self.config.sketch_batch {
            SketchBatch::Current => batch.clone(),
            SketchBatch::Full => Batch::full(),
        };
        let lcfg = LanczosConfig {
            k: self.config.k,
            iters: self.config.t_pow,
            seed: self.refresh_seed(self.step),
            reorth: self.config.reorth,
        };
        let mut calls = 0u64;
        let result = block_lanczos(
            |v| {
                calls += 1;
                problem.hvp(theta, v, &sketch_batch).map(ParamVector::into_inner)
            },
            theta.len(),
            &lcfg,
        );
        self.hvp_count += calls;
        match result {
            Ok(s) => {
                self.sketch = Some(s.with_refreshed_at(self.step));
                self.refreshes += 1;
                Ok(true)
            }
            Err(Error::NonFinite { .. }) => {
                self.refresh_failures += 1;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }
}

impl Optimizer for Cao {
    fn name(&self) -> &'static str {
        "cao"
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }

    fn hvp_count(&self) -> u64 {
        self.hvp_count
    }

    fn step(&mut self, problem: &dyn Problem, theta: &mut ParamVector, batch: &Batch) -> Result<StepRecord> {
        problem.check_inputs(theta, batch)?;
        let refreshed = if self.refresh_due() { self.refresh(problem, theta, batch)? } else { false };

        let (loss, g) = loss_and_grad(problem, theta, batch, self.step)?;
        let g = decayed_gradient(g, theta, self.config.weight_decay);
        let mut rec = StepRecord::new(self.step, loss, g.norm());

        let mut d = match (&self.sketch, self.config.k) {
            (_, 0) => match self.config.k0_mode {
                ZeroRankMode::Identity => g.into_inner(),
                ZeroRankMode::EtaScaled => {
                    let mut d = g.into_inner();
                    linalg::scale(1.0 / self.config.eta, &mut d);
                    d
                }
            },
            (Some(sketch), _) => {
                let pc = DampedPreconditioner::new(sketch, self.config.eta, self.config.floor)?;
                rec.clamped = pc.clamped();
                rec.negative_curvature = sketch.has_negative();
                rec.sketch_eigvals = sketch.eigvals.clone();
                pc.apply(&g)?
            }
            // warm-up phase or no successful refresh yet
            (None, _) => g.into_inner(),
        };
        clip_direction(&mut d, self.config.clip_c);
        rec.update_norm = apply_update(theta, self.config.alpha, &d);
        rec.refreshed = refreshed;
        rec.hvps = self.hvp_count;
        self.step += 1;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    #[test]
    fn rank_zero_step_is_gradient_descent() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let mut opt = Cao::new(CaoConfig { k: 0, alpha: 0.1, ..Default::default() });
        let mut theta = ParamVector(vec![1.0, 1.0]);
        let rec = opt.step(&q, &mut theta, &Batch::full()).unwrap();
        assert_eq!(theta.0, vec![1.0 - 0.1 * 2.0, 1.0 - 0.1 * 8.0]);
        assert!(!rec.refreshed);
        assert_eq!(opt.hvp_count(), 0);
    }

    #[test]
    fn first_step_refreshes() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let mut opt = Cao::new(CaoConfig { k: 1, m: 5, t_pow: 3, ..Default::default() });
        let mut theta = ParamVector(vec![1.0, 1.0]);
        let rec = opt.step(&q, &mut theta, &Batch::full()).unwrap();
        assert!(rec.refreshed);
        assert_eq!(rec.hvps, 4);
        assert_eq!(opt.sketch().unwrap().refreshed_at, 0);
    }

    #[test]
    fn warm_steps_delay_refresh() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let mut opt = Cao::new(CaoConfig { k: 1, m: 100, warm_steps: 3, ..Default::default() });
        let mut theta = ParamVector(vec![1.0, 1.0]);
        let refreshed: Vec<bool> =
            (0..5).map(|_| opt.step(&q, &mut theta, &Batch::full()).unwrap().refreshed).collect();
        assert_eq!(refreshed, vec![false, false, false, true, false]);
    }

    #[test]
    fn eta_scaled_rank_zero() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let cfg =
            CaoConfig { k: 0, alpha: 0.1, eta: 4.0, k0_mode: ZeroRankMode::EtaScaled, ..Default::default() };
        let mut opt = Cao::new(cfg);
        let mut theta = ParamVector(vec![1.0, 1.0]);
        opt.step(&q, &mut theta, &Batch::full()).unwrap();
        assert!((theta[0] - (1.0 - 0.1 * 2.0 / 4.0)).abs() < 1e-15);
        assert!((theta[1] - (1.0 - 0.1 * 8.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(CaoConfig { m: 0, ..Default::default() }.validate().is_err());
        assert!(CaoConfig { eta: 0.0, ..Default::default() }.validate().is_err());
        assert!(CaoConfig { t_pow: 0, ..Default::default() }.validate().is_err());
        CaoConfig::default().validate().unwrap();
    }
}
