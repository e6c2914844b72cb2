use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Batch, ParamVector, Problem, ProblemMeta};
use crate::linalg;

/// `f(θ) = ½ (θ − θ*)ᵀ A (θ − θ*)` with `A = Q diag(spectrum) Qᵀ`.
///
/// With a strictly positive spectrum this is an exact PL instance:
/// `L = max(spectrum)`, `mu = min(spectrum)`, `f* = 0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    meta: ProblemMeta,
    spectrum: Vec<f64>,
    /// Row-major, exactly symmetric.
    a: Vec<f64>,
    center: Vec<f64>,
}

impl Quadratic {
    /// Axis-aligned quadratic centred at the origin.
    pub fn diagonal(spectrum: &[f64]) -> Self {
        let n = spectrum.len();
        let mut a = vec![0.0; n * n];
        for (i, &s) in spectrum.iter().enumerate() {
            a[i * n + i] = s;
        }
        Self::from_parts(spectrum.to_vec(), a, vec![0.0; n])
    }

    /// Quadratic whose eigenbasis is a seeded random rotation.
    pub fn rotated(spectrum: &[f64], seed: u64) -> Self {
        let n = spectrum.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = linalg::random_orthogonal(&mut rng, n);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[(i, k)] * spectrum[k] * q[(j, k)]).sum();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        Self::from_parts(spectrum.to_vec(), a, vec![0.0; n])
    }

    fn from_parts(spectrum: Vec<f64>, a: Vec<f64>, center: Vec<f64>) -> Self {
        let n = spectrum.len();
        let mut meta = ProblemMeta::new("quadratic", n);
        let max = spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            meta.smoothness_l = Some(max);
        }
        meta.f_star = Some(0.0);
        if min > 0.0 {
            meta.pl_mu = Some(min);
        }
        Quadratic { meta, spectrum, a, center }
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        assert_eq!(center.len(), self.meta.dim, "center length");
        self.center = center;
        self
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Dense `A` as an nalgebra matrix.
    pub fn matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.meta.dim;
        nalgebra::DMatrix::from_row_slice(n, n, &self.a)
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.meta.dim;
        self.a.chunks_exact(n).map(|row| linalg::dot(row, x)).collect()
    }

    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.center).map(|(t, c)| t - c).collect()
    }
}

impl Problem for Quadratic {
    fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    fn initial_point(&self, seed: u64) -> ParamVector {
        let mut rng = super::init_rng(seed);
        let mut x = linalg::randn(&mut rng, self.meta.dim);
        linalg::axpy(1.0, &self.center, &mut x);
        ParamVector(x)
    }

    fn eval_loss(&self, theta: &[f64], _batch: &Batch) -> f64 {
        let r = self.residual(theta);
        0.5 * linalg::dot(&r, &self.matvec(&r))
    }

    fn eval_grad(&self, theta: &[f64], _batch: &Batch) -> Vec<f64> {
        self.matvec(&self.residual(theta))
    }

    fn eval_loss_grad(&self, theta: &[f64], _batch: &Batch) -> (f64, Vec<f64>) {
        let r = self.residual(theta);
        let g = self.matvec(&r);
        (0.5 * linalg::dot(&r, &g), g)
    }

    fn eval_hvp(&self, _theta: &[f64], v: &[f64], _batch: &Batch) -> Vec<f64> {
        self.matvec(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_grad_hvp_examples() {
        let q = Quadratic::diagonal(&[2.0, 8.0]);
        let b = Batch::full();
        assert_eq!(q.loss(&[0.0, 0.0], &b).unwrap(), 0.0);
        assert_eq!(q.loss(&[1.0, 1.0], &b).unwrap(), 5.0);
        assert_eq!(q.grad(&[1.0, 1.0], &b).unwrap().0, vec![2.0, 8.0]);
        assert_eq!(q.hvp(&[0.4, 0.2], &[1.0, 0.0], &b).unwrap().0, vec![2.0, 0.0]);
        assert_eq!(q.hvp(&[0.4, 0.2], &[0.0, 0.0], &b).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn constants_from_spectrum() {
        let q = Quadratic::rotated(&[100.0, 10.0, 1.0, 1.0], 5);
        assert_eq!(q.meta().smoothness_l, Some(100.0));
        assert_eq!(q.meta().pl_mu, Some(1.0));
        assert_eq!(q.meta().f_star, Some(0.0));
        q.meta().validate().unwrap();
    }

    #[test]
    fn rotated_matrix_has_requested_spectrum() {
        let spec = [7.0, 3.0, 2.0, 0.5, 0.25];
        let q = Quadratic::rotated(&spec, 11);
        let mut eig: Vec<f64> = q.matrix().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in eig.iter().zip(spec) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn center_is_stationary() {
        let q = Quadratic::rotated(&[3.0, 1.0, 2.0], 2).with_center(vec![1.0, -2.0, 0.5]);
        let g = q.grad(&[1.0, -2.0, 0.5], &Batch::full()).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }
}
