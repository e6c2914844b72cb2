mod common;

use cao::sketch::{block_lanczos, block_lanczos_from, qr_orthonormalize, LanczosConfig};
use common::*;
use proptest::prelude::*;

fn lanczos(a: &nalgebra::DMatrix<f64>, k: usize, iters: usize, seed: u64) -> cao::Sketch {
    let cfg = LanczosConfig { k, iters, seed, reorth: true };
    block_lanczos(|v| Ok(matvec(a, v)), a.nrows(), &cfg).unwrap()
}

#[test]
fn ritz_values_match_dense_eigen_on_spiked_family() {
    for trial in 0..6u64 {
        let mut r = rng(900 + trial);
        let spectrum = spiked_spectrum(&mut r, 100);
        let a = symmetric_with_spectrum(&mut r, &spectrum);
        let oracle = sorted_eigen(&a);
        for k in [1, 3, 5] {
            let s = lanczos(&a, k, 30, trial);
            for (i, (lam, v)) in oracle.iter().take(k).enumerate() {
                assert!((s.eigvals[i] - lam).abs() <= 1e-6 * lam.abs(), "trial {trial} k {k} i {i}");
                assert!(dot(&s.basis[i], v).abs() >= 0.999);
            }
            assert!(s.orthonormality_error() < 1e-12);
        }
    }
}

#[test]
fn more_iterations_never_hurt() {
    let mut r = rng(31);
    let spectrum = spiked_spectrum(&mut r, 60);
    let a = symmetric_with_spectrum(&mut r, &spectrum);
    let top = sorted_eigen(&a)[0].0;
    let mut prev = f64::INFINITY;
    for iters in [1, 2, 4, 8, 16, 32] {
        let err = (lanczos(&a, 2, iters, 5).eigvals[0] - top).abs();
        assert!(err <= prev * (1.0 + 1e-9) + 1e-13, "iters {iters}: {err} > {prev}");
        prev = err;
    }
    assert!(prev < 1e-10);
}

#[test]
fn rotating_the_operator_rotates_the_sketch() {
    let mut r = rng(77);
    let spectrum = spiked_spectrum(&mut r, 40);
    let a = symmetric_with_spectrum(&mut r, &spectrum);
    let q = orthogonal(&mut r, 40);
    let b = &q * &a * q.transpose();
    let cfg = LanczosConfig { k: 3, iters: 25, seed: 0, reorth: true };
    let start: Vec<Vec<f64>> = (0..3).map(|_| cao::linalg::randn(&mut r, 40)).collect();
    let rotated_start: Vec<Vec<f64>> = start.iter().map(|v| matvec(&q, v)).collect();
    let sa = block_lanczos_from(|v| Ok(matvec(&a, v)), start, &cfg).unwrap();
    let sb = block_lanczos_from(|v| Ok(matvec(&b, v)), rotated_start, &cfg).unwrap();
    for i in 0..3 {
        assert!((sa.eigvals[i] - sb.eigvals[i]).abs() <= 1e-10 * sa.eigvals[i].abs());
        let qv = matvec(&q, &sa.basis[i]);
        assert!((dot(&qv, &sb.basis[i]).abs() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn hvp_budget_is_iters_plus_one_times_k() {
    let a = nalgebra::DMatrix::<f64>::identity(30, 30) * 2.0;
    for (k, iters) in [(1, 1), (3, 10), (5, 7)] {
        let mut calls = 0usize;
        let cfg = LanczosConfig { k, iters, seed: 1, reorth: true };
        block_lanczos(
            |v| {
                calls += 1;
                Ok(matvec(&a, v))
            },
            30,
            &cfg,
        )
        .unwrap();
        assert_eq!(calls, (iters + 1) * k);
    }
}

#[test]
fn deterministic_under_seed() {
    let mut r = rng(4);
    let spectrum = spiked_spectrum(&mut r, 50);
    let a = symmetric_with_spectrum(&mut r, &spectrum);
    let x = lanczos(&a, 3, 10, 42);
    let y = lanczos(&a, 3, 10, 42);
    assert_eq!(x, y);
}

#[test]
fn indefinite_operator_orders_signed() {
    let mut r = rng(8);
    let mut spectrum = vec![3.0, -9.0];
    spectrum.extend((0..18).map(|i| 0.05 * i as f64 - 0.5));
    let a = symmetric_with_spectrum(&mut r, &spectrum);
    let s = lanczos(&a, 2, 60, 3);
    assert!((s.eigvals[0] - 3.0).abs() < 1e-8);
    assert!((s.eigvals[1] + 9.0).abs() < 1e-8);
    assert!(s.has_negative());
}

#[test]
fn dominant_negative_eigenvalue_is_found_and_ranked_last() {
    let a = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-4.0, 1.0, 0.5]));
    // k = 1 converges by magnitude, so the single Ritz value is the negative one
    let one = lanczos(&a, 1, 50, 0);
    assert!((one.eigvals[0] + 4.0).abs() < 1e-10);
    let all = lanczos(&a, 3, 50, 0);
    assert!((all.eigvals[0] - 1.0).abs() < 1e-10);
    assert!((all.eigvals[1] - 0.5).abs() < 1e-10);
    assert!((all.eigvals[2] + 4.0).abs() < 1e-10);
}

proptest! {
    #[test]
    fn qr_output_is_orthonormal(cols in 1usize..6, n in 6usize..30, seed in 0u64..1000, dup in proptest::bool::ANY) {
        let mut r = rng(seed);
        let mut m: Vec<Vec<f64>> = (0..cols).map(|_| cao::linalg::randn(&mut r, n)).collect();
        if dup && cols > 1 {
            m[cols - 1] = m[0].iter().map(|x| 2.0 * x).collect();
        }
        let q = qr_orthonormalize(&m, seed, true).unwrap();
        prop_assert_eq!(q.columns.len(), cols);
        for i in 0..cols {
            for j in 0..cols {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot(&q.columns[i], &q.columns[j]) - want).abs() < 1e-12);
            }
            let first = q.columns[i].iter().find(|x| **x != 0.0).unwrap();
            prop_assert!(*first > 0.0);
        }
        prop_assert_eq!(q.repairs, usize::from(dup && cols > 1));
        // the first column spans the same line as the input's first column
        prop_assert!((dot(&q.columns[0], &m[0]).abs() - norm(&m[0])).abs() < 1e-10 * norm(&m[0]));
    }
}
