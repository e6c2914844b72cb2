use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_indices, batch_len, Batch, ParamVector, Problem, ProblemMeta};
use crate::linalg;

/// One-hidden-layer tanh network with softmax cross-entropy on seeded
/// Gaussian-cluster data.
///
/// Parameters are packed as `[W1 (h×d), b1 (h), W2 (c×h), b2 (c)]`, row-major.
/// Gradients come from hand-written backprop and HVPs from the
/// forward-over-reverse (R-operator) pass over the same graph.
#[derive(Debug, Clone)]
pub struct MlpSynthetic {
    meta: ProblemMeta,
    d: usize,
    h: usize,
    c: usize,
    /// Row-major `n_samples × d`.
    inputs: Vec<f64>,
    labels: Vec<usize>,
    data_seed: u64,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl MlpSynthetic {
    /// `widths = [inputs, hidden, classes]`.
    pub fn new(widths: [usize; 3], n_samples: usize, seed: u64, separation: f64) -> Self {
        let [d, h, c] = widths;
        assert!(d > 0 && h > 0 && c >= 2 && n_samples > 0, "bad mlp shape");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..c)
            .map(|_| {
                let mut m = linalg::randn(&mut rng, d);
                linalg::scale(separation, &mut m);
                m
            })
            .collect();
        let mut inputs = Vec::with_capacity(n_samples * d);
        let mut labels = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let y = i % c;
            let mut x = linalg::randn(&mut rng, d);
            linalg::axpy(1.0, &centers[y], &mut x);
            inputs.extend_from_slice(&x);
            labels.push(y);
        }
        let dim = h * d + h + c * h + c;
        MlpSynthetic {
            meta: ProblemMeta::new("mlp_synthetic", dim),
            d,
            h,
            c,
            inputs,
            labels,
            data_seed: seed,
        }
    }

    /// Stretches every input by `factor` along one seeded random unit
    /// direction: `x ← x + (factor − 1)(u·x)u`. The model class is unchanged
    /// but the first layer's curvature becomes anisotropic and rotated.
    pub fn with_input_stretch(mut self, factor: f64) -> Self {
        if factor == 1.0 {
            return self;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.data_seed);
        rng.set_stream(2);
        let mut u = linalg::randn(&mut rng, self.d);
        let n = linalg::norm(&u);
        linalg::scale(1.0 / n, &mut u);
        for x in self.inputs.chunks_mut(self.d) {
            let proj = linalg::dot(&u, x);
            linalg::axpy((factor - 1.0) * proj, &u, x);
        }
        self
    }

    pub fn widths(&self) -> [usize; 3] {
        [self.d, self.h, self.c]
    }

    fn layout(&self) -> Layout {
        let w1 = 0;
        let b1 = self.h * self.d;
        let w2 = b1 + self.h;
        let b2 = w2 + self.c * self.h;
        Layout { w1, b1, w2, b2 }
    }

    fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d..(i + 1) * self.d]
    }

    /// Per-sample loss; accumulates `scale·∇` into `grad` and `scale·H v` into
    /// `hv` when requested.
    fn sample_pass(
        &self,
        theta: &[f64],
        i: usize,
        scale: f64,
        grad: Option<&mut [f64]>,
        hvp: Option<(&[f64], &mut [f64])>,
    ) -> f64 {
        let (d, h, c) = (self.d, self.h, self.c);
        let lay = self.layout();
        let x = self.input(i);
        let y = self.labels[i];
        let w1 = &theta[lay.w1..lay.b1];
        let b1 = &theta[lay.b1..lay.w2];
        let w2 = &theta[lay.w2..lay.b2];
        let b2 = &theta[lay.b2..];

        let z: Vec<f64> = (0..h).map(|j| (linalg::dot(&w1[j * d..(j + 1) * d], x) + b1[j]).tanh()).collect();
        let o: Vec<f64> = (0..c).map(|k| linalg::dot(&w2[k * h..(k + 1) * h], &z) + b2[k]).collect();
        let omax = o.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ex: Vec<f64> = o.iter().map(|v| (v - omax).exp()).collect();
        let sum: f64 = ex.iter().sum();
        let loss = sum.ln() + omax - o[y];
        if grad.is_none() && hvp.is_none() {
            return loss;
        }
        let p: Vec<f64> = ex.iter().map(|e| e / sum).collect();

        let mut delta_o = p.clone();
        delta_o[y] -= 1.0;
        let slope: Vec<f64> = z.iter().map(|zj| 1.0 - zj * zj).collect();
        let delta_z: Vec<f64> = (0..h).map(|j| (0..c).map(|k| w2[k * h + j] * delta_o[k]).sum()).collect();
        let delta_a: Vec<f64> = delta_z.iter().zip(&slope).map(|(a, b)| a * b).collect();

        if let Some(g) = grad {
            for j in 0..h {
                linalg::axpy(scale * delta_a[j], x, &mut g[lay.w1 + j * d..lay.w1 + (j + 1) * d]);
                g[lay.b1 + j] += scale * delta_a[j];
            }
            for k in 0..c {
                linalg::axpy(scale * delta_o[k], &z, &mut g[lay.w2 + k * h..lay.w2 + (k + 1) * h]);
                g[lay.b2 + k] += scale * delta_o[k];
            }
        }

        if let Some((v, out)) = hvp {
            let v1 = &v[lay.w1..lay.b1];
            let c1 = &v[lay.b1..lay.w2];
            let v2 = &v[lay.w2..lay.b2];
            let c2 = &v[lay.b2..];

            let r_a: Vec<f64> = (0..h).map(|j| linalg::dot(&v1[j * d..(j + 1) * d], x) + c1[j]).collect();
            let r_z: Vec<f64> = r_a.iter().zip(&slope).map(|(a, s)| a * s).collect();
            let r_o: Vec<f64> = (0..c)
                .map(|k| {
                    linalg::dot(&v2[k * h..(k + 1) * h], &z)
                        + linalg::dot(&w2[k * h..(k + 1) * h], &r_z)
                        + c2[k]
                })
                .collect();
            let p_ro = linalg::dot(&p, &r_o);
            let r_delta_o: Vec<f64> = (0..c).map(|k| p[k] * (r_o[k] - p_ro)).collect();
            let r_delta_z: Vec<f64> = (0..h)
                .map(|j| (0..c).map(|k| v2[k * h + j] * delta_o[k] + w2[k * h + j] * r_delta_o[k]).sum())
                .collect();
            let r_delta_a: Vec<f64> =
                (0..h).map(|j| r_delta_z[j] * slope[j] - 2.0 * delta_z[j] * z[j] * r_z[j]).collect();

            for j in 0..h {
                linalg::axpy(scale * r_delta_a[j], x, &mut out[lay.w1 + j * d..lay.w1 + (j + 1) * d]);
                out[lay.b1 + j] += scale * r_delta_a[j];
            }
            for k in 0..c {
                let row = &mut out[lay.w2 + k * h..lay.w2 + (k + 1) * h];
                for j in 0..h {
                    row[j] += scale * (r_delta_o[k] * z[j] + delta_o[k] * r_z[j]);
                }
                out[lay.b2 + k] += scale * r_delta_o[k];
            }
        }
        loss
    }
}

impl Problem for MlpSynthetic {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn num_samples(&self) -> usize {
        self.labels.len()
    }

    /// Scaled-Gaussian weights (`1/sqrt(fan_in)`), zero biases.
    fn initial_point(&self, seed: u64) -> ParamVector {
        let mut rng = super::init_rng(seed ^ self.data_seed.rotate_left(32));
        let lay = self.layout();
        let mut theta = vec![0.0; self.meta.dim];
        let w1 = linalg::randn(&mut rng, self.h * self.d);
        let s1 = 1.0 / (self.d as f64).sqrt();
        for (t, w) in theta[lay.w1..lay.b1].iter_mut().zip(w1) {
            *t = s1 * w;
        }
        let w2 = linalg::randn(&mut rng, self.c * self.h);
        let s2 = 1.0 / (self.h as f64).sqrt();
        for (t, w) in theta[lay.w2..lay.b2].iter_mut().zip(w2) {
            *t = s2 * w;
        }
        ParamVector(theta)
    }

    fn eval_loss(&self, theta: &[f64], batch: &Batch) -> f64 {
        let m = batch_len(batch, self.num_samples()) as f64;
        batch_indices(batch, self.num_samples())
            .map(|i| self.sample_pass(theta, i, 0.0, None, None))
            .sum::<f64>()
            / m
    }

    fn eval_grad(&self, theta: &[f64], batch: &Batch) -> Vec<f64> {
        self.eval_loss_grad(theta, batch).1
    }

    fn eval_loss_grad(&self, theta: &[f64], batch: &Batch) -> (f64, Vec<f64>) {
        let m = batch_len(batch, self.num_samples()) as f64;
        let mut g = vec![0.0; theta.len()];
        let total: f64 = batch_indices(batch, self.num_samples())
            .map(|i| self.sample_pass(theta, i, 1.0 / m, Some(&mut g), None))
            .sum();
        (total / m, g)
    }

    fn eval_hvp(&self, theta: &[f64], v: &[f64], batch: &Batch) -> Vec<f64> {
        let m = batch_len(batch, self.num_samples()) as f64;
        let mut hv = vec![0.0; theta.len()];
        for i in batch_indices(batch, self.num_samples()) {
            self.sample_pass(theta, i, 1.0 / m, None, Some((v, &mut hv)));
        }
        hv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_and_uniform_loss() {
        let p = MlpSynthetic::new([3, 4, 5], 20, 0, 1.0);
        assert_eq!(p.dim(), 4 * 3 + 4 + 5 * 4 + 5);
        // zero weights → uniform softmax
        let f = p.loss(&vec![0.0; p.dim()], &Batch::full()).unwrap();
        assert!((f - (5f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn labels_cover_classes() {
        let p = MlpSynthetic::new([2, 3, 3], 9, 4, 1.0);
        for k in 0..3 {
            assert_eq!(p.labels.iter().filter(|&&y| y == k).count(), 3);
        }
    }
}
