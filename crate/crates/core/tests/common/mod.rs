//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use cao::sketch::Sketch;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar orthogonal matrix from nalgebra's Householder QR.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q diag(spectrum) Qᵀ`, exactly symmetrized.
pub fn symmetric_with_spectrum(rng: &mut ChaCha8Rng, spectrum: &[f64]) -> DMatrix<f64> {
    let n = spectrum.len();
    let q = orthogonal(rng, n);
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Spectrum with five leading eigenvalues whose consecutive ratios lie in
/// `[0.4, 0.7]`, and a bulk spread over `±0.6·λ₅`. Relative gaps are ≥ 0.3.
pub fn spiked_spectrum(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(n);
    let mut top = 10.0 * (1.0 + rng.random::<f64>());
    for _ in 0..5 {
        s.push(top);
        top *= 0.4 + 0.3 * rng.random::<f64>();
    }
    let lam5 = s[4];
    for _ in 5..n {
        s.push(0.6 * lam5 * (2.0 * rng.random::<f64>() - 1.0));
    }
    s
}

/// Eigenpairs sorted by descending eigenvalue.
pub fn sorted_eigen(a: &DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let e = a.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..a.nrows())
        .map(|i| (e.eigenvalues[i], e.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs
}

pub fn matvec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(v)).iter().copied().collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b).max(f64::MIN_POSITIVE)
}

/// Dense clamped operator `V diag(max(λ+η, floor)) Vᵀ + η (I − VVᵀ)`.
pub fn dense_damped(sketch: &Sketch, eta: f64, floor: f64) -> DMatrix<f64> {
    let n = sketch.dim();
    let mut a = DMatrix::identity(n, n) * eta;
    for (lam, v) in sketch.eigvals.iter().zip(&sketch.basis) {
        let d = (lam + eta).max(floor);
        let v = DVector::from_column_slice(v);
        a += (&v * v.transpose()) * (d - eta);
    }
    a
}

/// `P g` via an LU solve of the dense clamped operator.
pub fn dense_precondition(sketch: &Sketch, eta: f64, floor: f64, g: &[f64]) -> Vec<f64> {
    let a = dense_damped(sketch, eta, floor);
    a.lu()
        .solve(&DVector::from_column_slice(g))
        .expect("damped operator is invertible")
        .iter()
        .copied()
        .collect()
}

/// `P` assembled entrywise from the spectral form with compensated sums.
/// Unlike the dense operator, its entries stay accurate when a denominator is
/// clamped to the floor.
pub fn dense_inverse(sketch: &Sketch, eta: f64, floor: f64) -> DMatrix<f64> {
    let n = sketch.dim();
    let mut p = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let mut terms: Vec<f64> = Vec::new();
            let mut weights: Vec<f64> = Vec::new();
            if j == l {
                terms.push(1.0 / eta);
                weights.push(1.0);
            }
            for (lam, v) in sketch.eigvals.iter().zip(&sketch.basis) {
                let d = (lam + eta).max(floor);
                terms.push(v[j] * v[l]);
                weights.push(1.0 / d - 1.0 / eta);
            }
            p[(j, l)] = compensated_dot(&terms, &weights);
        }
    }
    p
}

/// `P g` from [`dense_inverse`].
pub fn dense_inverse_apply(sketch: &Sketch, eta: f64, floor: f64, g: &[f64]) -> Vec<f64> {
    let p = dense_inverse(sketch, eta, floor);
    (0..g.len())
        .map(|i| {
            let row: Vec<f64> = p.row(i).iter().copied().collect();
            compensated_dot(&row, g)
        })
        .collect()
}

/// Dot product with error-free transforms, about twice working precision.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(*y, -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += pe + se;
    }
    s + c
}

/// Random sketch with orthonormal basis from a Haar matrix.
pub fn random_sketch(rng: &mut ChaCha8Rng, n: usize, eigvals: &[f64]) -> Sketch {
    let q = orthogonal(rng, n);
    let pairs =
        eigvals.iter().enumerate().map(|(i, l)| (*l, q.column(i).iter().copied().collect())).collect();
    Sketch::from_pairs(n, pairs).unwrap()
}
