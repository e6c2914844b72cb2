mod common;

use cao::precondition::{precondition, DampedPreconditioner, DEFAULT_FLOOR};
use common::*;
use rand::Rng;

/// Relative agreement with the dense LU solve. When a denominator hits the
/// floor, the dense operator's own rounding caps what LU can resolve, so that
/// case gets a condition-scaled tolerance and a tight check against the
/// explicit inverse instead.
#[test]
fn matches_dense_solve_on_random_cases() {
    let mut r = rng(2024);
    let mut clamped_cases = 0;
    for case in 0..1000 {
        let n = r.random_range(2..=200);
        let k = r.random_range(1..=n.min(6));
        let eigvals: Vec<f64> = (0..k).map(|_| r.random_range(-0.5..20.0)).collect();
        let eta = 10f64.powf(r.random_range(-2.0..1.0));
        let s = random_sketch(&mut r, n, &eigvals);
        let g = cao::linalg::randn(&mut r, n);
        let pc = DampedPreconditioner::new(&s, eta, DEFAULT_FLOOR).unwrap();
        let ours = precondition(&g, &pc).unwrap();
        let lu = dense_precondition(&s, eta, DEFAULT_FLOOR, &g);
        let explicit = dense_inverse_apply(&s, eta, DEFAULT_FLOOR, &g);
        assert!(rel_err(&ours, &explicit) < 1e-10, "case {case}: {}", rel_err(&ours, &explicit));
        if pc.clamped() {
            clamped_cases += 1;
            let dens = pc.denominators();
            let hi = dens.iter().fold(eta, |a, b| a.max(*b));
            let lo = dens.iter().fold(eta, |a, b| a.min(*b));
            let tol = 1e-10f64.max(100.0 * f64::EPSILON * n as f64 * hi / lo);
            assert!(rel_err(&ours, &lu) < tol, "clamped case {case}");
        } else {
            assert!(rel_err(&ours, &lu) < 1e-10, "case {case}: {}", rel_err(&ours, &lu));
        }
    }
    assert!(clamped_cases > 0 && clamped_cases < 1000);
}

#[test]
fn eigen_action_and_complement_scaling() {
    let mut r = rng(5);
    let s = random_sketch(&mut r, 20, &[9.0, 3.0, -0.5]);
    let eta = 1.0;
    let pc = DampedPreconditioner::new(&s, eta, DEFAULT_FLOOR).unwrap();
    for (lam, v) in s.eigvals.iter().zip(&s.basis) {
        let pv = pc.apply(v).unwrap();
        let want: Vec<f64> = v.iter().map(|x| x / (lam + eta)).collect();
        assert!(rel_err(&pv, &want) < 1e-13);
    }
    let mut w = cao::linalg::randn(&mut r, 20);
    for v in &s.basis {
        let c = dot(v, &w);
        cao::linalg::axpy(-c, v, &mut w);
    }
    let pw = pc.apply(&w).unwrap();
    let want: Vec<f64> = w.iter().map(|x| x / eta).collect();
    assert!(rel_err(&pw, &want) < 1e-12);
}

#[test]
fn symmetric_and_positive_definite_even_when_clamped() {
    let mut r = rng(6);
    for eigvals in [vec![4.0, 1.0], vec![2.0, -3.0], vec![-0.1]] {
        let s = random_sketch(&mut r, 15, &eigvals);
        let pc = DampedPreconditioner::new(&s, 0.1, DEFAULT_FLOOR).unwrap();
        for _ in 0..20 {
            let x = cao::linalg::randn(&mut r, 15);
            let y = cao::linalg::randn(&mut r, 15);
            let a = dot(&x, &pc.apply(&y).unwrap());
            let b = dot(&pc.apply(&x).unwrap(), &y);
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
            assert!(pc.quadratic_form(&x).unwrap() > 0.0);
        }
    }
}

#[test]
fn norm_bound_with_nonnegative_sketch() {
    let mut r = rng(7);
    for _ in 0..200 {
        let n = r.random_range(3..60);
        let k = r.random_range(1..=n.min(4));
        let eigvals: Vec<f64> = (0..k).map(|_| r.random_range(0.0..50.0)).collect();
        let eta = 10f64.powf(r.random_range(-3.0..1.0));
        let s = random_sketch(&mut r, n, &eigvals);
        let g = cao::linalg::randn(&mut r, n);
        let pc = DampedPreconditioner::new(&s, eta, DEFAULT_FLOOR).unwrap();
        let pg = pc.apply(&g).unwrap();
        assert!(norm(&pg) <= norm(&g) / eta);
        assert!(pc.operator_norm_bound() <= 1.0 / eta);
    }
}

#[test]
fn newton_step_on_captured_quadratic() {
    // Full-rank sketch with tiny eta reproduces the Newton step.
    let mut r = rng(8);
    let spectrum = [5.0, 2.0, 0.5];
    let a = symmetric_with_spectrum(&mut r, &spectrum);
    let pairs = sorted_eigen(&a);
    let s = cao::Sketch::from_pairs(3, pairs).unwrap();
    let g = vec![1.0, -2.0, 0.5];
    let pc = DampedPreconditioner::new(&s, 1e-9, DEFAULT_FLOOR).unwrap();
    let d = pc.apply(&g).unwrap();
    let back = matvec(&a, &d);
    assert!(rel_err(&back, &g) < 1e-6);
}

#[test]
fn rejects_bad_inputs() {
    let s = cao::Sketch::from_pairs(2, vec![(1.0, vec![1.0, 0.0])]).unwrap();
    assert!(DampedPreconditioner::new(&s, 0.0, DEFAULT_FLOOR).is_err());
    assert!(DampedPreconditioner::new(&s, -1.0, DEFAULT_FLOOR).is_err());
    let pc = DampedPreconditioner::new(&s, 1.0, DEFAULT_FLOOR).unwrap();
    assert!(pc.apply(&[1.0, 2.0, 3.0]).is_err());
    assert!(pc.apply(&[f64::NAN, 0.0]).is_err());
}
