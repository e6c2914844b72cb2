//! Top-`k` spectral sketch of a Hessian from Hessian-vector products.
//!
//! The procedure is orthogonal (subspace) iteration with a final Rayleigh–Ritz
//! step: start from the QR of a Gaussian `n×k` block, apply the HVP to every
//! column and re-orthonormalize `T` times, then project once more and solve
//! the `k×k` eigenproblem. It costs exactly `(T + 1)·k` HVPs.
//!
//! Ritz pairs are ordered by signed eigenvalue, descending. The iteration
//! itself converges towards the largest-*magnitude* part of the spectrum, so a
//! dominant negative eigenvalue can show up in the sketch (ranked last);
//! [`Sketch::has_negative`] exposes that for logging.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::DENSE_ORACLE_CAP;

/// Rank-deficiency threshold for QR, relative to the column's norm before projection.
pub const QR_RANK_TOL: f64 = 1e-12;

/// Off-diagonal tolerance for the small Jacobi eigensolver.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    /// Ritz values, sorted descending.
    pub eigvals: Vec<f64>,
    /// Orthonormal Ritz vectors, one `Vec` per column.
    pub basis: Vec<Vec<f64>>,
    /// Optimizer step at which the sketch was computed.
    pub refreshed_at: u64,
    dim: usize,
}

impl Sketch {
    pub fn empty(dim: usize) -> Self {
        Sketch { eigvals: Vec::new(), basis: Vec::new(), refreshed_at: 0, dim }
    }

    /// Builds a sketch from explicit eigenpairs, sorting them descending.
    pub fn from_pairs(dim: usize, pairs: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let mut pairs = pairs;
        if pairs.iter().any(|(_, v)| v.len() != dim) {
            return Err(Error::contract("sketch vector length does not match dim"));
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (eigvals, basis) = pairs.into_iter().unzip();
        Ok(Sketch { eigvals, basis, refreshed_at: 0, dim })
    }

    pub fn with_refreshed_at(mut self, step: u64) -> Self {
        self.refreshed_at = step;
        self
    }

    pub fn k(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.eigvals.is_empty()
    }

    pub fn has_negative(&self) -> bool {
        self.eigvals.iter().any(|&l| l < 0.0)
    }

    /// `max |VᵀV − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.k();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((linalg::dot(&self.basis[i], &self.basis[j]) - target).abs());
            }
        }
        worst
    }

    /// Coefficients `Vᵀx`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|v| linalg::dot(v, x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosConfig {
    pub k: usize,
    /// Number of subspace-iteration sweeps.
    pub iters: usize,
    pub seed: u64,
    /// Second Gram–Schmidt pass in every QR.
    pub reorth: bool,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig { k: 1, iters: 10, seed: 0, reorth: true }
    }
}

/// Output of [`qr_orthonormalize`].
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub columns: Vec<Vec<f64>>,
    /// Columns that were numerically dependent and got replaced.
    pub repairs: usize,
}

/// Modified Gram–Schmidt QR, returning only the orthonormal factor.
///
/// Each column is made to have its first nonzero entry positive. A column
/// whose norm after projection falls below [`QR_RANK_TOL`] (relative to its
/// norm before) is replaced by a seeded random direction orthogonalized
/// against the columns already accepted.
pub fn qr_orthonormalize(m: &[Vec<f64>], seed: u64, reorth: bool) -> Result<Orthonormalized> {
    let k = m.len();
    let n = m.first().map_or(0, Vec::len);
    if k > n {
        return Err(Error::contract(format!("qr of {n}x{k} block needs k <= n")));
    }
    if m.iter().any(|c| c.len() != n) {
        return Err(Error::contract("ragged block"));
    }
    let passes = if reorth { 2 } else { 1 };
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut repairs = 0;
    let mut rng: Option<ChaCha8Rng> = None;
    for col in m {
        let mut v = col.clone();
        let before = linalg::norm(&v);
        orthogonalize(&mut v, &q, passes);
        let mut after = linalg::norm(&v);
        if !(after > QR_RANK_TOL * before) || before == 0.0 {
            let rng = rng.get_or_insert_with(|| ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9));
            loop {
                repairs += 1;
                v = linalg::randn(rng, n);
                let b = linalg::norm(&v);
                orthogonalize(&mut v, &q, 2);
                after = linalg::norm(&v);
                if after > QR_RANK_TOL * b {
                    break;
                }
            }
        }
        if !after.is_finite() {
            return Err(Error::non_finite("qr column"));
        }
        linalg::scale(1.0 / after, &mut v);
        if let Some(&first) = v.iter().find(|&&x| x != 0.0) {
            if first < 0.0 {
                linalg::scale(-1.0, &mut v);
            }
        }
        q.push(v);
    }
    Ok(Orthonormalized { columns: q, repairs })
}

fn orthogonalize(v: &mut [f64], q: &[Vec<f64>], passes: usize) {
    for _ in 0..passes {
        for u in q {
            let c = linalg::dot(u, v);
            linalg::axpy(-c, u, v);
        }
    }
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix (row-major).
///
/// Returns eigenvalues and the matching eigenvectors as columns, unsorted.
pub fn jacobi_eigen(a: &[f64], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), k * k);
    let mut a = a.to_vec();
    let mut v = vec![0.0; k * k];
    for i in 0..k {
        v[i * k + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * k + j] * a[i * k + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = a[p * k + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let arp = a[r * k + p];
                    let arq = a[r * k + q];
                    a[r * k + p] = c * arp - s * arq;
                    a[r * k + q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let apr = a[p * k + r];
                    let aqr = a[q * k + r];
                    a[p * k + r] = c * apr - s * aqr;
                    a[q * k + r] = s * apr + c * aqr;
                }
                for r in 0..k {
                    let vrp = v[r * k + p];
                    let vrq = v[r * k + q];
                    v[r * k + p] = c * vrp - s * vrq;
                    v[r * k + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let vals = (0..k).map(|i| a[i * k + i]).collect();
    let vecs = (0..k).map(|j| (0..k).map(|i| v[i * k + j]).collect()).collect();
    (vals, vecs)
}

/// Top-`k` sketch from a seeded Gaussian start.
pub fn block_lanczos<F>(mut hvp: F, n: usize, cfg: &LanczosConfig) -> Result<Sketch>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if cfg.k > n {
        return Err(Error::contract(format!("sketch rank {} exceeds dimension {n}", cfg.k)));
    }
    if cfg.k == 0 {
        return Ok(Sketch::empty(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start: Vec<Vec<f64>> = (0..cfg.k).map(|_| linalg::randn(&mut rng, n)).collect();
    block_lanczos_from(&mut hvp, start, cfg)
}

/// Same as [`block_lanczos`] but with an explicit `n×k` starting block.
pub fn block_lanczos_from<F>(mut hvp: F, start: Vec<Vec<f64>>, cfg: &LanczosConfig) -> Result<Sketch>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k = start.len();
    if k == 0 {
        return Err(Error::contract("empty starting block"));
    }
    if cfg.iters == 0 {
        return Err(Error::contract("block_lanczos needs at least one iteration"));
    }
    let n = start[0].len();
    let mut apply = |v: &[f64]| -> Result<Vec<f64>> {
        let w = hvp(v)?;
        if w.len() != n {
            return Err(Error::contract("hvp returned wrong length"));
        }
        if !linalg::all_finite(&w) {
            return Err(Error::non_finite("hvp during sketch refresh"));
        }
        Ok(w)
    };
    let mut basis = qr_orthonormalize(&start, cfg.seed, cfg.reorth)?.columns;
    for t in 0..cfg.iters {
        let w = basis.iter().map(|v| apply(v)).collect::<Result<Vec<_>>>()?;
        basis = qr_orthonormalize(&w, cfg.seed.wrapping_add(t as u64 + 1), cfg.reorth)?.columns;
    }
    let w = basis.iter().map(|v| apply(v)).collect::<Result<Vec<_>>>()?;
    let mut small = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            small[i * k + j] = linalg::dot(&basis[i], &w[j]);
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            let s = 0.5 * (small[i * k + j] + small[j * k + i]);
            small[i * k + j] = s;
            small[j * k + i] = s;
        }
    }
    let (vals, vecs) = jacobi_eigen(&small, k);
    let pairs = vals
        .into_iter()
        .zip(vecs)
        .map(|(lambda, y)| {
            let mut ritz = vec![0.0; n];
            for (coef, v) in y.iter().zip(&basis) {
                linalg::axpy(*coef, v, &mut ritz);
            }
            (lambda, ritz)
        })
        .collect();
    Sketch::from_pairs(n, pairs)
}

/// Spectral norm of `(I − VVᵀ) H (I − VVᵀ)`: the curvature the sketch misses.
pub fn sketch_residual(sketch: &Sketch, dense_h: &DMatrix<f64>) -> Result<f64> {
    let n = dense_h.nrows();
    if dense_h.ncols() != n {
        return Err(Error::contract("dense Hessian must be square"));
    }
    if n > DENSE_ORACLE_CAP {
        return Err(Error::Unsupported(format!(
            "residual curvature needs the dense oracle, n = {n} > {DENSE_ORACLE_CAP}"
        )));
    }
    if sketch.dim() != n {
        return Err(Error::contract("sketch and Hessian dimensions differ"));
    }
    let mut proj = DMatrix::<f64>::identity(n, n);
    for v in &sketch.basis {
        let col = nalgebra::DVector::from_column_slice(v);
        proj -= &col * col.transpose();
    }
    let r = &proj * dense_h * &proj;
    let r = 0.5 * (&r + r.transpose());
    Ok(r.symmetric_eigen().eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs())))
}
