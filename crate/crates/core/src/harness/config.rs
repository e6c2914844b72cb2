use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{CaoConfig, OptimizerConfig};
use crate::problems::ProblemSpec;

/// A declarative experiment: one problem, several optimizers, several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment name; becomes the directory under `logs/`.
    pub name: String,
    pub problem: ProblemSpec,
    pub optimizers: Vec<NamedOptimizer>,
    pub seeds: Vec<u64>,
    /// Optimizer steps per run.
    pub steps: usize,
    /// Minibatch size; 0 means full batch.
    #[serde(default)]
    pub batch_size: usize,
    /// Pre-declared loss level for first-hit metrics.
    pub threshold: f64,
    /// Extra thresholds for the threshold-sweep table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<f64>,
    /// Full-data loss is recorded every `eval_every` steps (and always on the
    /// last step).
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_log_dir")]
    pub log_dir: PathBuf,
    /// Write elapsed seconds into step records. Off by default so logs are
    /// byte-reproducible.
    #[serde(default)]
    pub record_wall_clock: bool,
    /// A run is flagged as diverged once its loss exceeds this multiple of
    /// `max(|f₀|, 1)`.
    #[serde(default = "default_divergence_factor")]
    pub divergence_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOptimizer {
    pub name: String,
    #[serde(flatten)]
    pub config: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationGrid {
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub step_rule: StepRule,
    /// Multiplier `c` for [`StepRule::Effective`].
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
}

/// How each rank in an ablation picks its stepsize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Every rank uses the base optimizer's `alpha`.
    #[default]
    Fixed,
    /// `alpha = step_scale / L_eff` per rank and seed, where `L_eff` is the
    /// smoothness of the preconditioned objective at the initial point
    /// (needs a dense Hessian oracle).
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
    #[serde(default = "default_ms")]
    pub ms: Vec<u64>,
}

fn default_step_scale() -> f64 {
    1.0
}

fn default_eval_every() -> usize {
    1
}

fn default_log_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_divergence_factor() -> f64 {
    1e4
}

pub fn default_ks() -> Vec<usize> {
    vec![0, 1, 3, 5]
}

pub fn default_etas() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1]
}

pub fn default_ms() -> Vec<u64> {
    vec![200, 400, 800]
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid { ks: default_ks(), step_rule: StepRule::Fixed, step_scale: 1.0 }
    }
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { etas: default_etas(), ms: default_ms() }
    }
}

fn safe_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !s.starts_with('.')
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !safe_name(&self.name) {
            return bad(format!("experiment name `{}` must be [A-Za-z0-9._-]+", self.name));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.optimizers.is_empty() {
            return bad("at least one optimizer is required".into());
        }
        let mut names = BTreeSet::new();
        for o in &self.optimizers {
            if !safe_name(&o.name) {
                return bad(format!("optimizer name `{}` must be [A-Za-z0-9._-]+", o.name));
            }
            if !names.insert(o.name.as_str()) {
                return bad(format!("duplicate optimizer name `{}`", o.name));
            }
            o.config.validate().map_err(|e| Error::Config(format!("optimizer `{}`: {e}", o.name)))?;
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if !self.threshold.is_finite() || self.thresholds.iter().any(|t| !t.is_finite()) {
            return bad("thresholds must be finite".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor must exceed 1".into());
        }
        if let Some(a) = &self.ablation {
            if a.ks.is_empty() {
                return bad("ablation.ks is empty".into());
            }
            if !(a.step_scale > 0.0 && a.step_scale.is_finite()) {
                return bad("ablation.step_scale must be positive".into());
            }
        }
        if let Some(s) = &self.sweep {
            if s.etas.is_empty() || s.ms.is_empty() {
                return bad("sweep grid is empty".into());
            }
            if s.etas.iter().any(|e| !(*e > 0.0)) || s.ms.contains(&0) {
                return bad("sweep etas must be positive and ms nonzero".into());
            }
        }
        self.problem.build().map_err(|e| Error::Config(format!("problem: {e}")))?;
        Ok(())
    }

    /// First optimizer of kind `cao`; the reference for speedups, ablations and sweeps.
    pub fn base_cao(&self) -> Result<(&str, &CaoConfig)> {
        self.optimizers
            .iter()
            .find_map(|o| match &o.config {
                OptimizerConfig::Cao(c) => Some((o.name.as_str(), c)),
                _ => None,
            })
            .ok_or_else(|| Error::Config("config has no optimizer of kind `cao`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
name = "demo"
seeds = [0, 1]
steps = 10
threshold = 0.5

[problem]
kind = "quadratic"
spectrum = [10.0, 1.0]

[[optimizers]]
name = "cao"
kind = "cao"
alpha = 0.05
k = 1

[[optimizers]]
name = "sgd"
kind = "sgd"
lr = 0.01
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.optimizers.len(), 2);
        assert_eq!(c.eval_every, 1);
        assert_eq!(c.batch_size, 0);
        let (name, cao) = c.base_cao().unwrap();
        assert_eq!(name, "cao");
        assert_eq!(cao.k, 1);
        assert_eq!(cao.m, CaoConfig::default().m);
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            ("seeds = [0, 1]", "seeds = []"),
            ("seeds = [0, 1]", "seeds = [1, 1]"),
            ("name = \"demo\"", "name = \"a/b\""),
            ("alpha = 0.05", "alpha = -1.0"),
            ("alpha = 0.05", "alpah = 0.05"),
            ("name = \"sgd\"", "name = \"cao\""),
            ("kind = \"sgd\"", "kind = \"lbfgs\""),
            ("steps = 10", "steps = 0"),
        ] {
            let text = BASIC.replacen(from, to, 1);
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))), "{to} accepted");
        }
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::from_toml(BASIC).unwrap();
        let j = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&j).unwrap();
        assert_eq!(back, c);
    }
}
