use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LogisticRegression, MlpSynthetic, Problem, Quadratic, Rosenbrock};
use crate::error::{Error, Result};

/// Declarative problem description, as found in the `[problem]` table of an
/// experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        /// Leading eigenvalues.
        spectrum: Vec<f64>,
        /// Optional repeated tail appended after `spectrum`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fill: Option<SpectrumFill>,
        #[serde(default)]
        seed: u64,
        /// Random eigenbasis when true, axis-aligned otherwise.
        #[serde(default = "default_true")]
        rotate: bool,
    },
    Rosenbrock {
        n: usize,
    },
    Logreg {
        n_features: usize,
        n_samples: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_separation")]
        separation: f64,
    },
    MlpSynthetic {
        widths: [usize; 3],
        n_samples: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_separation")]
        separation: f64,
        /// Input stretch factor along one random direction (1 = isotropic).
        #[serde(default = "default_stretch")]
        input_stretch: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFill {
    pub value: f64,
    pub count: usize,
}

fn default_true() -> bool {
    true
}

fn default_stretch() -> f64 {
    1.0
}

fn default_l2() -> f64 {
    1e-3
}

fn default_separation() -> f64 {
    1.0
}

impl ProblemSpec {
    /// Skewed spectrum `[top..., fill × count]` on a seeded rotation.
    pub fn skewed_quadratic(top: &[f64], fill: f64, count: usize, seed: u64) -> Self {
        ProblemSpec::Quadratic {
            spectrum: top.to_vec(),
            fill: Some(SpectrumFill { value: fill, count }),
            seed,
            rotate: true,
        }
    }

    pub fn full_spectrum(&self) -> Option<Vec<f64>> {
        match self {
            ProblemSpec::Quadratic { spectrum, fill, .. } => {
                let mut s = spectrum.clone();
                if let Some(f) = fill {
                    s.extend(std::iter::repeat_n(f.value, f.count));
                }
                Some(s)
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Problem>> {
        let p: Arc<dyn Problem> = match self {
            ProblemSpec::Quadratic { seed, rotate, .. } => {
                let s = self.full_spectrum().unwrap_or_default();
                if s.is_empty() {
                    return Err(Error::Config("quadratic spectrum is empty".into()));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("quadratic spectrum must be finite".into()));
                }
                if *rotate {
                    Arc::new(Quadratic::rotated(&s, *seed))
                } else {
                    Arc::new(Quadratic::diagonal(&s))
                }
            }
            ProblemSpec::Rosenbrock { n } => {
                if *n < 2 {
                    return Err(Error::Config("rosenbrock needs n >= 2".into()));
                }
                Arc::new(Rosenbrock::new(*n))
            }
            ProblemSpec::Logreg { n_features, n_samples, seed, l2, separation } => {
                if *n_features == 0 || *n_samples == 0 || *l2 < 0.0 {
                    return Err(Error::Config("logreg needs positive sizes and l2 >= 0".into()));
                }
                Arc::new(LogisticRegression::new(*n_features, *n_samples, *seed, *l2, *separation))
            }
            ProblemSpec::MlpSynthetic { widths, n_samples, seed, separation, input_stretch } => {
                if !(*input_stretch > 0.0 && input_stretch.is_finite()) {
                    return Err(Error::Config("input_stretch must be positive".into()));
                }
                if widths[0] == 0 || widths[1] == 0 || widths[2] < 2 || *n_samples == 0 {
                    return Err(Error::Config(
                        "mlp_synthetic needs widths [d>0, h>0, classes>=2] and samples".into(),
                    ));
                }
                Arc::new(
                    MlpSynthetic::new(*widths, *n_samples, *seed, *separation)
                        .with_input_stretch(*input_stretch),
                )
            }
        };
        p.meta().validate()?;
        Ok(p)
    }
}
