use super::{Batch, ParamVector, Problem, ProblemMeta};
use crate::linalg;

/// Chained Rosenbrock `Σ 100 (x_{i+1} − x_i²)² + (1 − x_i)²`; minimum 0 at all-ones.
///
/// Not globally L-smooth, so no `L` is advertised.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    meta: ProblemMeta,
}

impl Rosenbrock {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "rosenbrock needs n >= 2");
        let mut meta = ProblemMeta::new("rosenbrock", n);
        meta.f_star = Some(0.0);
        Rosenbrock { meta }
    }
}

impl Problem for Rosenbrock {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    /// Classic `(−1.2, 1, −1.2, 1, …)` start with a small seeded jitter.
    fn initial_point(&self, seed: u64) -> ParamVector {
        let mut rng = super::init_rng(seed);
        let jitter = linalg::randn(&mut rng, self.meta.dim);
        ParamVector(
            jitter.iter().enumerate().map(|(i, j)| if i % 2 == 0 { -1.2 } else { 1.0 } + 0.05 * j).collect(),
        )
    }

    fn eval_loss(&self, x: &[f64], _batch: &Batch) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    fn eval_grad(&self, x: &[f64], _batch: &Batch) -> Vec<f64> {
        let n = x.len();
        let mut g = vec![0.0; n];
        for i in 0..n - 1 {
            let t = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * t;
        }
        g
    }

    fn eval_hvp(&self, x: &[f64], v: &[f64], _batch: &Batch) -> Vec<f64> {
        let n = x.len();
        let mut hv = vec![0.0; n];
        for i in 0..n - 1 {
            // Hessian block of term i over (x_i, x_{i+1}).
            let h_ii = 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
            let h_ij = -400.0 * x[i];
            hv[i] += h_ii * v[i] + h_ij * v[i + 1];
            hv[i + 1] += h_ij * v[i] + 200.0 * v[i + 1];
        }
        hv
    }
}
