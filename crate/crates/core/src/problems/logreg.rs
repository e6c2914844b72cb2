use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_indices, batch_len, Batch, ParamVector, Problem, ProblemMeta};
use crate::linalg;

/// ℓ2-regularized logistic regression on two seeded Gaussian classes.
///
/// Labels alternate, so every even-sized full batch is balanced. Class means
/// are `±separation · u` for a seeded unit vector `u`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    meta: ProblemMeta,
    /// Row-major `n_samples × n_features`.
    features: Vec<f64>,
    /// ±1 labels.
    signs: Vec<f64>,
    l2: f64,
    init_seed: u64,
}

impl LogisticRegression {
    pub fn new(n_features: usize, n_samples: usize, seed: u64, l2: f64, separation: f64) -> Self {
        assert!(n_features > 0 && n_samples > 0, "empty logistic problem");
        assert!(l2 >= 0.0, "l2 must be non-negative");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dir = linalg::randn(&mut rng, n_features);
        let dn = linalg::norm(&dir);
        linalg::scale(separation / dn, &mut dir);
        let mut features = Vec::with_capacity(n_features * n_samples);
        let mut signs = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut x = linalg::randn(&mut rng, n_features);
            linalg::axpy(s, &dir, &mut x);
            features.extend_from_slice(&x);
            signs.push(s);
        }
        let max_sq = features.chunks_exact(n_features).map(|x| linalg::dot(x, x)).fold(0.0, f64::max);
        let mut meta = ProblemMeta::new("logreg", n_features);
        // Bounds every minibatch Hessian: σ(1−σ) ≤ ¼.
        meta.smoothness_l = Some(0.25 * max_sq + l2);
        LogisticRegression { meta, features, signs, l2, init_seed: seed }
    }

    fn row(&self, i: usize) -> &[f64] {
        let d = self.meta.dim;
        &self.features[i * d..(i + 1) * d]
    }
}

/// `log(1 + e^{-m})` without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Problem for LogisticRegression {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn num_samples(&self) -> usize {
        self.signs.len()
    }

    fn initial_point(&self, seed: u64) -> ParamVector {
        let mut rng = super::init_rng(seed ^ self.init_seed.rotate_left(32));
        let mut w = linalg::randn(&mut rng, self.meta.dim);
        linalg::scale(0.01, &mut w);
        ParamVector(w)
    }

    fn eval_loss(&self, w: &[f64], batch: &Batch) -> f64 {
        let m = batch_len(batch, self.num_samples()) as f64;
        let data: f64 = batch_indices(batch, self.num_samples())
            .map(|i| softplus_neg(self.signs[i] * linalg::dot(self.row(i), w)))
            .sum();
        data / m + 0.5 * self.l2 * linalg::dot(w, w)
    }

    fn eval_grad(&self, w: &[f64], batch: &Batch) -> Vec<f64> {
        let m = batch_len(batch, self.num_samples()) as f64;
        let mut g = vec![0.0; w.len()];
        for i in batch_indices(batch, self.num_samples()) {
            let x = self.row(i);
            let s = self.signs[i];
            let coef = -s * sigmoid(-s * linalg::dot(x, w));
            linalg::axpy(coef / m, x, &mut g);
        }
        linalg::axpy(self.l2, w, &mut g);
        g
    }

    fn eval_hvp(&self, w: &[f64], v: &[f64], batch: &Batch) -> Vec<f64> {
        let m = batch_len(batch, self.num_samples()) as f64;
        let mut hv = vec![0.0; w.len()];
        for i in batch_indices(batch, self.num_samples()) {
            let x = self.row(i);
            let p = sigmoid(linalg::dot(x, w));
            let coef = p * (1.0 - p) * linalg::dot(x, v);
            linalg::axpy(coef / m, x, &mut hv);
        }
        linalg::axpy(self.l2, v, &mut hv);
        hv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_loss_is_ln2() {
        let p = LogisticRegression::new(4, 10, 1, 0.0, 1.0);
        let f = p.loss(&[0.0; 4], &Batch::full()).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus_neg(1000.0), 0.0);
        assert!((softplus_neg(-1000.0) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_batch_rejected() {
        let p = LogisticRegression::new(3, 4, 1, 0.1, 1.0);
        assert!(p.loss(&[0.0; 3], &Batch::new(vec![4], 0)).is_err());
    }
}
