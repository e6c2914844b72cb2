use serde::{Deserialize, Serialize};

use super::{apply_update, clip_direction, decayed_gradient, loss_and_grad, Optimizer, StepRecord};
use crate::error::{Error, Result};
use crate::problems::{Batch, ParamVector, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Update clip threshold; 0 disables clipping.
    pub clip: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { lr: 0.01, momentum: 0.9, weight_decay: 0.0, clip: 0.0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("sgd lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("sgd momentum must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.clip >= 0.0) {
            return Err(Error::Config("sgd weight_decay and clip must be >= 0".into()));
        }
        Ok(())
    }
}

/// Heavy-ball SGD: `buf ← μ·buf + g; θ ← θ − lr·clip(buf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub config: SgdConfig,
    step: u64,
    buf: Vec<f64>,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Self {
        Sgd { config, step: 0, buf: Vec::new() }
    }
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }

    fn step(&mut self, problem: &dyn Problem, theta: &mut ParamVector, batch: &Batch) -> Result<StepRecord> {
        problem.check_inputs(theta, batch)?;
        let (loss, g) = loss_and_grad(problem, theta, batch, self.step)?;
        let g = decayed_gradient(g, theta, self.config.weight_decay);
        let mut rec = StepRecord::new(self.step, loss, g.norm());
        if self.buf.len() != g.len() {
            self.buf = vec![0.0; g.len()];
        }
        let mu = self.config.momentum;
        if mu == 0.0 {
            self.buf.copy_from_slice(&g);
        } else {
            for (b, gi) in self.buf.iter_mut().zip(g.iter()) {
                *b = mu * *b + gi;
            }
        }
        let mut d = self.buf.clone();
        clip_direction(&mut d, self.config.clip);
        rec.update_norm = apply_update(theta, self.config.lr, &d);
        self.step += 1;
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled decay: added to the gradient.
    pub weight_decay: f64,
    pub clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0, clip: 0.0 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("adam lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must be in [0, 1)".into()));
        }
        if !(self.eps > 0.0 && self.weight_decay >= 0.0 && self.clip >= 0.0) {
            return Err(Error::Config("adam eps must be > 0, weight_decay and clip >= 0".into()));
        }
        Ok(())
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, m: Vec::new(), v: Vec::new() }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }

    fn step(&mut self, problem: &dyn Problem, theta: &mut ParamVector, batch: &Batch) -> Result<StepRecord> {
        problem.check_inputs(theta, batch)?;
        let (loss, g) = loss_and_grad(problem, theta, batch, self.step)?;
        let g = decayed_gradient(g, theta, self.config.weight_decay);
        let mut rec = StepRecord::new(self.step, loss, g.norm());
        if self.m.len() != g.len() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
        }
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let mut d = vec![0.0; g.len()];
        for i in 0..g.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            d[i] = m_hat / (v_hat.sqrt() + eps);
        }
        clip_direction(&mut d, self.config.clip);
        rec.update_norm = apply_update(theta, self.config.lr, &d);
        self.step += 1;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    #[test]
    fn sgd_without_momentum_is_gd() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let mut opt = Sgd::new(SgdConfig { lr: 0.1, momentum: 0.0, ..Default::default() });
        let mut theta = ParamVector(vec![1.0, 1.0]);
        opt.step(&q, &mut theta, &Batch::full()).unwrap();
        assert_eq!(theta.0, vec![0.8, 1.0 - 0.1 * 8.0]);
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig { momentum: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { beta2: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { lr: -1.0, ..Default::default() }.validate().is_err());
    }
}
