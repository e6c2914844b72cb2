//! Curvature-adaptive optimization with periodic low-rank Hessian sketches.
//!
//! The optimizer periodically estimates the top-`k` eigenpairs of the loss
//! Hessian from Hessian-vector products (subspace iteration followed by a
//! Rayleigh–Ritz step), then preconditions gradients with the damped inverse
//! `(B + ηI)⁻¹` of that sketch. Directions outside the sketch keep a plain
//! first-order step scaled by `1/η`.
//!
//! Modules:
//!
//! - [`problems`]: matrix-free objectives with analytic gradients and HVPs.
//! - [`sketch`]: top-`k` Hessian sketch from HVPs.
//! - [`precondition`]: the damped low-rank inverse in closed form.
//! - [`optimizer`]: the curvature-adaptive loop plus SGD-momentum and Adam baselines.
//! - [`theory`]: executable checks of descent, stepsize and contraction bounds.
//! - [`harness`]: seeded comparisons, ablations, sweeps and table/plot emission.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod precondition;
pub mod problems;
pub mod sketch;
pub mod theory;

pub use error::{Error, Result};
pub use optimizer::{Adam, AdamConfig, AnyOptimizer, Cao, CaoConfig, Sgd, SgdConfig, StepRecord};
pub use precondition::DampedPreconditioner;
pub use problems::{Batch, ParamVector, Problem, ProblemMeta, ProblemSpec};
pub use sketch::{block_lanczos, LanczosConfig, Sketch};
