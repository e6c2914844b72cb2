mod common;

use cao::optimizer::{BatchSchedule, Checkpoint, Optimizer, ZeroRankMode};
use cao::problems::Quadratic;
use cao::{
    Adam, AdamConfig, AnyOptimizer, Batch, Cao, CaoConfig, ParamVector, Problem, ProblemSpec, Sgd, SgdConfig,
};
use common::*;

fn logreg() -> std::sync::Arc<dyn Problem> {
    ProblemSpec::Logreg { n_features: 8, n_samples: 200, seed: 3, l2: 1e-3, separation: 1.0 }.build().unwrap()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn rank_zero_is_bitwise_plain_sgd() {
    let problem = logreg();
    for seed in 0..3u64 {
        let schedule = BatchSchedule::new(problem.num_samples(), 16, seed);
        let batches = schedule.batches(1000);
        let mut cao = Cao::new(CaoConfig { k: 0, alpha: 0.05, seed, ..Default::default() });
        let mut sgd = Sgd::new(SgdConfig { lr: 0.05, momentum: 0.0, ..Default::default() });
        let mut a = problem.initial_point(seed);
        let mut b = a.clone();
        for (_, batch) in &batches {
            let ra = cao.step(problem.as_ref(), &mut a, batch).unwrap();
            let rb = sgd.step(problem.as_ref(), &mut b, batch).unwrap();
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
            assert_eq!(bits(&a), bits(&b));
        }
        assert_eq!(cao.hvp_count(), 0);
    }
}

#[test]
fn hvp_count_matches_refresh_schedule() {
    let problem = Quadratic::rotated(&[9.0, 4.0, 1.0, 0.5, 0.25, 0.1], 4);
    for (steps, m, k, t) in [(100u64, 10u64, 1usize, 3usize), (101, 10, 2, 5), (37, 50, 3, 2), (64, 1, 1, 1)]
    {
        let mut opt = Cao::new(CaoConfig { k, m, t_pow: t, alpha: 0.01, eta: 1.0, ..Default::default() });
        let mut theta = problem.initial_point(0);
        let mut refreshed_at = Vec::new();
        for s in 0..steps {
            if opt.step(&problem, &mut theta, &Batch::full()).unwrap().refreshed {
                refreshed_at.push(s);
            }
        }
        let expected = steps.div_ceil(m) * (t as u64 + 1) * k as u64;
        assert_eq!(opt.hvp_count(), expected, "steps {steps} m {m} k {k} T {t}");
        assert!(refreshed_at.iter().all(|s| s % m == 0));
        assert_eq!(refreshed_at.len() as u64, steps.div_ceil(m));
    }
}

#[test]
fn sgd_momentum_follows_heavy_ball_recurrence() {
    let spectrum = [3.0, 1.0, 0.2];
    let problem = Quadratic::diagonal(&spectrum);
    let (lr, mu) = (0.1, 0.8);
    let mut opt = Sgd::new(SgdConfig { lr, momentum: mu, ..Default::default() });
    let mut theta = ParamVector(vec![1.0, -2.0, 0.5]);
    let mut x = theta.0.clone();
    let mut buf = [0.0; 3];
    for _ in 0..50 {
        opt.step(&problem, &mut theta, &Batch::full()).unwrap();
        for i in 0..3 {
            buf[i] = mu * buf[i] + spectrum[i] * x[i];
            x[i] -= lr * buf[i];
        }
    }
    assert!(rel_err(&theta, &x) < 1e-14);
}

#[test]
fn adam_follows_bias_corrected_recurrence() {
    let spectrum = [3.0, 1.0, 0.2];
    let problem = Quadratic::diagonal(&spectrum);
    let cfg = AdamConfig { lr: 0.05, ..Default::default() };
    let mut opt = Adam::new(cfg.clone());
    let mut theta = ParamVector(vec![1.0, -2.0, 0.5]);
    let mut x = theta.0.clone();
    let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
    for t in 1..=60 {
        opt.step(&problem, &mut theta, &Batch::full()).unwrap();
        for i in 0..3 {
            let g = spectrum[i] * x[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = m[i] / (1.0 - cfg.beta1.powi(t));
            let vh = v[i] / (1.0 - cfg.beta2.powi(t));
            x[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    assert!(rel_err(&theta, &x) < 1e-13);
}

#[test]
fn full_rank_sketch_with_small_damping_takes_newton_step() {
    let problem = Quadratic::rotated(&[50.0, 5.0, 0.5], 9);
    // eta is tiny next to the spectrum but large enough that rounding left in
    // the (empty) complement is not blown up by 1/eta.
    let cfg = CaoConfig { k: 3, t_pow: 40, eta: 1e-6, alpha: 1.0, m: 1000, ..Default::default() };
    let mut opt = Cao::new(cfg);
    let mut theta = problem.initial_point(1);
    let f0 = problem.loss(&theta, &Batch::full()).unwrap();
    opt.step(&problem, &mut theta, &Batch::full()).unwrap();
    let f1 = problem.loss(&theta, &Batch::full()).unwrap();
    assert!(f1 < 1e-9 * f0, "f0 {f0} f1 {f1}");
}

#[test]
fn clip_bounds_every_update() {
    let problem = Quadratic::rotated(&[100.0, 1.0], 2);
    let cfg = CaoConfig { k: 1, alpha: 0.5, clip_c: 0.1, eta: 0.01, m: 5, ..Default::default() };
    let mut opt = Cao::new(cfg);
    let mut theta = ParamVector(vec![30.0, -40.0]);
    for _ in 0..40 {
        let rec = opt.step(&problem, &mut theta, &Batch::full()).unwrap();
        assert!(rec.update_norm <= 0.5 * 0.1 * (1.0 + 1e-12));
    }
}

#[test]
fn eta_scaled_rank_zero_divides_by_eta() {
    let problem = logreg();
    let eta = 4.0;
    let mut a_opt =
        Cao::new(CaoConfig { k: 0, alpha: 0.2, eta, k0_mode: ZeroRankMode::EtaScaled, ..Default::default() });
    let mut b_opt = Sgd::new(SgdConfig { lr: 0.2 / eta, momentum: 0.0, ..Default::default() });
    let mut a = problem.initial_point(0);
    let mut b = a.clone();
    for _ in 0..100 {
        a_opt.step(problem.as_ref(), &mut a, &Batch::full()).unwrap();
        b_opt.step(problem.as_ref(), &mut b, &Batch::full()).unwrap();
    }
    assert!(rel_err(&a, &b) < 1e-12);
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let problem = logreg();
    let schedule = BatchSchedule::new(problem.num_samples(), 20, 5);
    let batches = schedule.batches(120);
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        AnyOptimizer::Cao(Cao::new(CaoConfig {
            k: 2,
            m: 25,
            alpha: 0.5,
            eta: 0.5,
            seed: 5,
            ..Default::default()
        })),
        AnyOptimizer::Sgd(Sgd::new(SgdConfig { lr: 0.1, ..Default::default() })),
        AnyOptimizer::Adam(Adam::new(AdamConfig { lr: 0.01, ..Default::default() })),
    ];
    for fresh in configs {
        let mut straight = fresh.clone();
        let mut theta = problem.initial_point(5);
        for (_, b) in &batches {
            straight.step(problem.as_ref(), &mut theta, b).unwrap();
        }

        let mut first = fresh.clone();
        let mut t2 = problem.initial_point(5);
        for (_, b) in &batches[..37] {
            first.step(problem.as_ref(), &mut t2, b).unwrap();
        }
        let path = dir.path().join(format!("{}.json", first.name()));
        Checkpoint::new(t2, first).save(&path).unwrap();
        let Checkpoint { theta: mut t2, optimizer: mut resumed, .. } = Checkpoint::load(&path).unwrap();
        assert_eq!(resumed.steps_taken(), 37);
        for (_, b) in &batches[37..] {
            resumed.step(problem.as_ref(), &mut t2, b).unwrap();
        }
        assert_eq!(bits(&theta), bits(&t2), "{}", resumed.name());
        assert_eq!(straight, resumed);
    }
}

#[test]
fn checkpoint_rejects_foreign_documents() {
    assert!(Checkpoint::from_json(r#"{"format":"other","version":1,"theta":[],"optimizer":{"kind":"sgd"}}"#)
        .is_err());
    let cp = Checkpoint::new(ParamVector(vec![0.1]), AnyOptimizer::Sgd(Sgd::new(SgdConfig::default())));
    let bumped = cp.to_json().replace("\"version\":1", "\"version\":99");
    assert!(Checkpoint::from_json(&bumped).is_err());
}

#[test]
fn divergence_is_reported_not_panicked() {
    let problem = Quadratic::diagonal(&[10.0, 1.0]);
    let mut opt = Sgd::new(SgdConfig { lr: 1.0, momentum: 0.0, ..Default::default() });
    let mut theta = ParamVector(vec![1.0, 1.0]);
    let mut err = None;
    for _ in 0..2000 {
        if let Err(e) = opt.step(&problem, &mut theta, &Batch::full()) {
            err = Some(e);
            break;
        }
    }
    assert!(matches!(err, Some(cao::Error::Diverged { .. })), "{err:?}");
}
