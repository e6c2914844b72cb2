//! Matrix-free objectives with analytic gradients and Hessian-vector products.
//!
//! Every problem is immutable after construction and evaluated as a pure
//! function of `(theta, batch)`, so one instance can be shared across threads.
//! The checked entry points ([`Problem::loss`], [`Problem::grad`],
//! [`Problem::hvp`]) validate dimensions, batch indices and finiteness; the
//! `eval_*` methods are the raw kernels each problem implements.

mod logreg;
mod mlp;
mod quadratic;
mod rosenbrock;
mod spec;

use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub use logreg::LogisticRegression;
pub use mlp::MlpSynthetic;
pub use quadratic::Quadratic;
pub use rosenbrock::Rosenbrock;
pub use spec::{ProblemSpec, SpectrumFill};

/// Largest dimension for which [`dense_hessian`] will materialize `H`.
pub const DENSE_ORACLE_CAP: usize = 500;

/// Generator for initial points. Runs on its own ChaCha stream so a start
/// drawn with seed `s` is independent of problem data built from seed `s`.
pub(crate) fn init_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Flat parameter vector `theta`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        ParamVector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.0)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Dimension plus whatever theory constants are known for a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub dim: usize,
    /// Global gradient-Lipschitz constant `L`, when one exists.
    pub smoothness_l: Option<f64>,
    /// PL constant `mu`; only set together with `f_star`.
    pub pl_mu: Option<f64>,
    pub f_star: Option<f64>,
}

impl ProblemMeta {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        ProblemMeta { name: name.into(), dim, smoothness_l: None, pl_mu: None, f_star: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::contract("problem dimension must be positive"));
        }
        if self.pl_mu.is_some() && self.f_star.is_none() {
            return Err(Error::contract("pl_mu requires f_star"));
        }
        for (name, v) in [("smoothness_l", self.smoothness_l), ("pl_mu", self.pl_mu)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::contract(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let (Some(l), Some(mu)) = (self.smoothness_l, self.pl_mu) {
            if l < mu {
                return Err(Error::contract(format!("smoothness_l {l} < pl_mu {mu}")));
            }
        }
        Ok(())
    }
}

/// Sample indices for one evaluation; empty means the full data set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub rng_seed: u64,
}

impl Batch {
    pub fn full() -> Self {
        Batch::default()
    }

    pub fn new(indices: Vec<usize>, rng_seed: u64) -> Self {
        Batch { indices, rng_seed }
    }

    pub fn is_full(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Iterates the sample indices a batch selects out of `num_samples`.
pub(crate) fn batch_indices<'a>(
    batch: &'a Batch,
    num_samples: usize,
) -> Box<dyn Iterator<Item = usize> + 'a> {
    if batch.indices.is_empty() {
        Box::new(0..num_samples)
    } else {
        Box::new(batch.indices.iter().copied())
    }
}

pub(crate) fn batch_len(batch: &Batch, num_samples: usize) -> usize {
    if batch.indices.is_empty() {
        num_samples
    } else {
        batch.indices.len()
    }
}

pub trait Problem: Send + Sync {
    fn meta(&self) -> &ProblemMeta;

    /// Number of data samples; 0 for deterministic objectives without data.
    fn num_samples(&self) -> usize {
        0
    }

    /// Seeded starting point.
    fn initial_point(&self, seed: u64) -> ParamVector;

    fn eval_loss(&self, theta: &[f64], batch: &Batch) -> f64;

    fn eval_grad(&self, theta: &[f64], batch: &Batch) -> Vec<f64>;

    fn eval_hvp(&self, theta: &[f64], v: &[f64], batch: &Batch) -> Vec<f64>;

    fn eval_loss_grad(&self, theta: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
        (self.eval_loss(theta, batch), self.eval_grad(theta, batch))
    }

    fn has_dense_oracle(&self) -> bool {
        true
    }

    fn dim(&self) -> usize {
        self.meta().dim
    }

    fn check_inputs(&self, theta: &[f64], batch: &Batch) -> Result<()> {
        let n = self.dim();
        if theta.len() != n {
            return Err(Error::contract(format!(
                "theta has length {}, problem `{}` expects {n}",
                theta.len(),
                self.meta().name
            )));
        }
        let ns = self.num_samples();
        if ns == 0 && !batch.indices.is_empty() {
            return Err(Error::contract(format!(
                "problem `{}` has no samples but batch selects {}",
                self.meta().name,
                batch.indices.len()
            )));
        }
        if let Some(&bad) = batch.indices.iter().find(|&&i| i >= ns) {
            return Err(Error::contract(format!("batch index {bad} out of range for {ns} samples")));
        }
        Ok(())
    }

    fn loss(&self, theta: &[f64], batch: &Batch) -> Result<f64> {
        self.check_inputs(theta, batch)?;
        let f = self.eval_loss(theta, batch);
        if !f.is_finite() {
            return Err(Error::non_finite(format!("loss of `{}`", self.meta().name)));
        }
        Ok(f)
    }

    fn grad(&self, theta: &[f64], batch: &Batch) -> Result<ParamVector> {
        self.check_inputs(theta, batch)?;
        finite_vec(self.eval_grad(theta, batch), || format!("gradient of `{}`", self.meta().name))
    }

    fn loss_grad(&self, theta: &[f64], batch: &Batch) -> Result<(f64, ParamVector)> {
        self.check_inputs(theta, batch)?;
        let (f, g) = self.eval_loss_grad(theta, batch);
        if !f.is_finite() {
            return Err(Error::non_finite(format!("loss of `{}`", self.meta().name)));
        }
        let g = finite_vec(g, || format!("gradient of `{}`", self.meta().name))?;
        Ok((f, g))
    }

    fn hvp(&self, theta: &[f64], v: &[f64], batch: &Batch) -> Result<ParamVector> {
        self.check_inputs(theta, batch)?;
        if v.len() != self.dim() {
            return Err(Error::contract(format!(
                "direction has length {}, expected {}",
                v.len(),
                self.dim()
            )));
        }
        if !linalg::all_finite(v) {
            return Err(Error::non_finite("hvp direction"));
        }
        finite_vec(self.eval_hvp(theta, v, batch), || format!("hvp of `{}`", self.meta().name))
    }
}

fn finite_vec(v: Vec<f64>, ctx: impl FnOnce() -> String) -> Result<ParamVector> {
    if linalg::all_finite(&v) {
        Ok(ParamVector(v))
    } else {
        Err(Error::non_finite(ctx()))
    }
}

/// Central-difference Hessian-vector product `(g(θ+εv) − g(θ−εv)) / 2ε`.
pub fn fd_hvp(
    problem: &dyn Problem,
    theta: &[f64],
    v: &[f64],
    batch: &Batch,
    eps: f64,
) -> Result<ParamVector> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::contract(format!("fd_hvp needs eps > 0, got {eps}")));
    }
    problem.check_inputs(theta, batch)?;
    if v.len() != theta.len() {
        return Err(Error::contract("fd_hvp direction length mismatch"));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Ok(ParamVector::zeros(theta.len()));
    }
    let plus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + eps * d).collect();
    let minus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t - eps * d).collect();
    if plus.as_slice() == theta && minus.as_slice() == theta {
        return Err(Error::DegenerateStep { eps });
    }
    let gp = problem.grad(&plus, batch)?;
    let gm = problem.grad(&minus, batch)?;
    let inv = 1.0 / (2.0 * eps);
    Ok(ParamVector(gp.iter().zip(gm.iter()).map(|(a, b)| (a - b) * inv).collect()))
}

/// Central difference of the loss along `dir`: an independent estimate of `<grad, dir>`.
pub fn fd_directional_derivative(
    problem: &dyn Problem,
    theta: &[f64],
    dir: &[f64],
    batch: &Batch,
    h: f64,
) -> Result<f64> {
    let plus: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + h * d).collect();
    let minus: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t - h * d).collect();
    Ok((problem.loss(&plus, batch)? - problem.loss(&minus, batch)?) / (2.0 * h))
}

/// Materializes `H(θ)` column by column from `hvp(θ, e_j)`.
pub fn dense_hessian(problem: &dyn Problem, theta: &[f64], batch: &Batch) -> Result<DMatrix<f64>> {
    if !problem.has_dense_oracle() {
        return Err(Error::Unsupported(format!(
            "problem `{}` has no dense Hessian oracle",
            problem.meta().name
        )));
    }
    let n = problem.dim();
    if n > DENSE_ORACLE_CAP {
        return Err(Error::Unsupported(format!(
            "dense Hessian requested for n = {n} > cap {DENSE_ORACLE_CAP}"
        )));
    }
    let mut h = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = problem.hvp(theta, &e, batch)?;
        h.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_rejects_mu_without_fstar() {
        let mut m = ProblemMeta::new("x", 2);
        m.pl_mu = Some(1.0);
        assert!(m.validate().is_err());
        m.f_star = Some(0.0);
        m.validate().unwrap();
        m.smoothness_l = Some(0.5);
        assert!(m.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        assert!(matches!(q.loss(&[1.0], &Batch::full()), Err(Error::Contract(_))));
        assert!(matches!(q.hvp(&[1.0, 1.0], &[1.0], &Batch::full()), Err(Error::Contract(_))));
    }

    #[test]
    fn batch_on_sample_free_problem_rejected() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let b = Batch::new(vec![0], 0);
        assert!(matches!(q.grad(&[0.0, 0.0], &b), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_loss_reported() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        assert!(matches!(q.loss(&[f64::MAX, 1.0], &Batch::full()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn fd_hvp_zero_direction_and_degenerate_eps() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let z = fd_hvp(&q, &[1.0, 1.0], &[0.0, 0.0], &Batch::full(), 1e-4).unwrap();
        assert_eq!(z.0, vec![0.0, 0.0]);
        let err = fd_hvp(&q, &[1.0, 1.0], &[1.0, 0.0], &Batch::full(), 1e-300).unwrap_err();
        assert!(matches!(err, Error::DegenerateStep { .. }));
        assert!(fd_hvp(&q, &[1.0, 1.0], &[1.0, 0.0], &Batch::full(), 0.0).is_err());
    }

    #[test]
    fn dense_hessian_respects_cap() {
        let q = Quadratic::diagonal(&vec![1.0; DENSE_ORACLE_CAP + 1]);
        let theta = vec![0.0; DENSE_ORACLE_CAP + 1];
        assert!(matches!(dense_hessian(&q, &theta, &Batch::full()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dense_hessian_of_diag_quadratic() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let h = dense_hessian(&q, &[0.3, -0.1], &Batch::full()).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]));
    }
}
