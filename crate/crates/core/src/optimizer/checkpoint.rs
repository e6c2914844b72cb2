//! Checkpoints: `(θ, optimizer state)` as a versioned JSON document.
//!
//! ```text
//! { "format": "cao-checkpoint", "version": 1,
//!   "theta": [...], "optimizer": { "kind": "cao" | "sgd" | "adam", ... } }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so save → load is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnyOptimizer;
use crate::error::{Error, Result};
use crate::problems::ParamVector;

pub const CHECKPOINT_FORMAT: &str = "cao-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub theta: ParamVector,
    pub optimizer: AnyOptimizer,
}

impl Checkpoint {
    pub fn new(theta: ParamVector, optimizer: AnyOptimizer) -> Self {
        Checkpoint { format: CHECKPOINT_FORMAT.to_string(), version: CHECKPOINT_VERSION, theta, optimizer }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(format!("not a checkpoint (format `{}`)", c.format));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {}", c.version));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text).map_err(|message| Error::Format { path: path.to_path_buf(), message })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{CaoConfig, OptimizerConfig};

    #[test]
    fn rejects_wrong_version() {
        let c = Checkpoint::new(ParamVector(vec![1.0]), OptimizerConfig::Cao(CaoConfig::default()).build());
        let text = c.to_json().replace("\"version\":1", "\"version\":9");
        assert!(Checkpoint::from_json(&text).is_err());
    }
}
