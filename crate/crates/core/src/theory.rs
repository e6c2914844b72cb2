//! Executable checks of the convergence theory behind the optimizer.
//!
//! Each check runs a deterministic experiment and returns a [`TheoryReport`]
//! whose `pass` flag is a function of the measured values and the recorded
//! tolerance only.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizer::{Cao, CaoConfig, Optimizer, ZeroRankMode};
use crate::precondition::DampedPreconditioner;
use crate::problems::{dense_hessian, Batch, ParamVector, Problem, ProblemSpec};
use crate::sketch::{block_lanczos, sketch_residual, LanczosConfig, Sketch};

/// Absolute slack on descent inequalities.
pub const DESCENT_SLACK: f64 = 1e-9;

/// Losses this close to `f*` are excluded from contraction ratios.
pub const CONTRACTION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub check: String,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TheoryReport {
    fn new(check: impl Into<String>, tolerance: f64) -> Self {
        TheoryReport { check: check.into(), pass: false, measured: BTreeMap::new(), tolerance, note: None }
    }

    fn set(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }

    /// Renames the report and inverts `pass`: a negative control passes when
    /// the underlying check fails.
    pub fn into_negative_control(mut self, name: impl Into<String>) -> Self {
        self.check = name.into();
        self.pass = !self.pass;
        self
    }

    pub fn to_json_line(&self) -> String {
        // Non-finite measurements are replaced so the record stays valid JSON.
        let mut clean = self.clone();
        for v in clean.measured.values_mut() {
            if !v.is_finite() {
                *v = f64::MAX.copysign(*v);
            }
        }
        serde_json::to_string(&clean).expect("report serializes")
    }
}

/// `α ≤ η² / (L (L + η))`.
pub fn sufficient_stepsize(l: f64, eta: f64) -> Result<f64> {
    if !(l > 0.0 && eta > 0.0) {
        return Err(Error::contract(format!("need L > 0 and eta > 0, got {l}, {eta}")));
    }
    Ok(eta * eta / (l * (l + eta)))
}

/// Constant stepsize `c·η/L` for the stationarity bound.
pub fn stationarity_stepsize(l: f64, eta: f64, c: f64) -> Result<f64> {
    if !(l > 0.0 && eta > 0.0 && c > 0.0) {
        return Err(Error::contract("stationarity stepsize needs positive L, eta, c"));
    }
    Ok(c * eta / l)
}

/// Largest Hessian spectral norm over `points` (dense oracle).
pub fn local_smoothness(problem: &dyn Problem, points: &[&[f64]], batch: &Batch) -> Result<f64> {
    let mut l: f64 = 0.0;
    for p in points {
        let h = dense_hessian(problem, p, batch)?;
        let h = 0.5 * (&h + h.transpose());
        let top = h.symmetric_eigen().eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        l = l.max(top);
    }
    Ok(l)
}

/// Spectral norm of the Hessian at `theta` restricted to the sketch complement.
pub fn residual_curvature(
    problem: &dyn Problem,
    theta: &[f64],
    sketch: &Sketch,
    batch: &Batch,
) -> Result<f64> {
    let h = dense_hessian(problem, theta, batch)?;
    sketch_residual(sketch, &h)
}

/// The sketch a fresh optimizer with `cfg` would compute at `theta` on its first step.
pub fn initial_sketch(problem: &dyn Problem, theta: &[f64], cfg: &CaoConfig) -> Result<Sketch> {
    let probe = Cao::new(cfg.clone());
    let lcfg = LanczosConfig { k: cfg.k, iters: cfg.t_pow, seed: probe.refresh_seed(0), reorth: cfg.reorth };
    block_lanczos(|v| problem.hvp(theta, v, &Batch::full()).map(ParamVector::into_inner), theta.len(), &lcfg)
}

/// Smoothness constant of the preconditioned objective seen by the optimizer:
/// `max(max λᵢ/dᵢ, λ̄_⊥/η)` for a sketch, `‖H‖` for the identity rank-zero
/// direction and `‖H‖/η` for the η-scaled one.
pub fn effective_smoothness(problem: &dyn Problem, theta: &[f64], cfg: &CaoConfig) -> Result<f64> {
    let batch = Batch::full();
    if cfg.k == 0 {
        let h_norm = residual_curvature(problem, theta, &Sketch::empty(theta.len()), &batch)?;
        return Ok(match cfg.k0_mode {
            ZeroRankMode::Identity => h_norm,
            ZeroRankMode::EtaScaled => h_norm / cfg.eta,
        });
    }
    let sketch = initial_sketch(problem, theta, cfg)?;
    let pc = DampedPreconditioner::new(&sketch, cfg.eta, cfg.floor)?;
    let captured =
        sketch.eigvals.iter().zip(pc.denominators()).fold(0.0_f64, |m, (l, d)| m.max((l / d).abs()));
    let perp = residual_curvature(problem, theta, &sketch, &batch)?;
    Ok(captured.max(perp / cfg.eta))
}

/// One `(θ, d, α)` triple for the descent-lemma check.
#[derive(Debug, Clone)]
pub struct DescentCase {
    pub theta: Vec<f64>,
    pub direction: Vec<f64>,
    pub alpha: f64,
}

/// `f(θ − αd) ≤ f(θ) − α⟨∇f, d⟩ + (Lα²/2)‖d‖²` on every case.
///
/// `smoothness` overrides the problem's advertised `L` (needed for problems
/// that are only locally smooth).
pub fn check_descent_lemma(
    problem: &dyn Problem,
    cases: &[DescentCase],
    smoothness: Option<f64>,
) -> Result<TheoryReport> {
    let l = smoothness
        .or(problem.meta().smoothness_l)
        .ok_or_else(|| Error::Unsupported(format!("`{}` has no smoothness constant", problem.meta().name)))?;
    let batch = Batch::full();
    let mut rep = TheoryReport::new("descent_lemma", DESCENT_SLACK);
    let mut worst = f64::NEG_INFINITY;
    for c in cases {
        let (f, g) = problem.loss_grad(&c.theta, &batch)?;
        let moved: Vec<f64> = c.theta.iter().zip(&c.direction).map(|(t, d)| t - c.alpha * d).collect();
        let lhs = problem.loss(&moved, &batch)?;
        let rhs = f - c.alpha * linalg::dot(&g, &c.direction)
            + 0.5 * l * c.alpha * c.alpha * linalg::dot(&c.direction, &c.direction);
        worst = worst.max(lhs - rhs);
    }
    rep.set("smoothness_l", l);
    rep.set("cases", cases.len() as f64);
    rep.set("max_violation", worst);
    rep.pass = worst <= DESCENT_SLACK;
    Ok(rep)
}

/// Runs full-batch CAO at `alpha_multiplier × η²/(L(L+η))` and checks
/// `f_t − f_{t+1} ≥ (α/2) λ_min(M_t) ‖g_t‖² − slack` at every step.
///
/// `M_t` is the clamped preconditioner actually applied: `(B_t + ηI)⁻¹` with a
/// sketch, the identity (or `I/η`) at rank zero or before the first refresh.
pub fn check_sufficient_descent(
    problem: &dyn Problem,
    cfg: &CaoConfig,
    theta0: &[f64],
    steps: usize,
    alpha_multiplier: f64,
) -> Result<TheoryReport> {
    let l = problem
        .meta()
        .smoothness_l
        .ok_or_else(|| Error::Unsupported("sufficient descent needs a known L".into()))?;
    if cfg.weight_decay != 0.0 {
        return Err(Error::contract("sufficient-descent check runs without weight decay"));
    }
    let alpha_star = sufficient_stepsize(l, cfg.eta)?;
    let alpha = alpha_multiplier * alpha_star;
    let mut opt = Cao::new(CaoConfig { alpha, ..cfg.clone() });
    let mut theta = ParamVector(theta0.to_vec());
    let batch = Batch::full();
    let mut rep = TheoryReport::new("sufficient_descent", DESCENT_SLACK);
    let mut min_margin = f64::INFINITY;
    let mut violations = 0u64;
    let mut min_lambda = f64::INFINITY;
    let mut fallback_ok = true;
    let mut clamp_events = 0u64;
    let mut f_prev = problem.loss(&theta, &batch)?;
    let f0 = f_prev;
    for _ in 0..steps {
        let rec = match opt.step(problem, &mut theta, &batch) {
            Ok(r) => r,
            Err(Error::Diverged { .. }) => {
                violations += 1;
                min_margin = f64::NEG_INFINITY;
                break;
            }
            Err(e) => return Err(e),
        };
        let lambda_min = match (opt.sketch(), cfg.k) {
            (Some(s), k) if k > 0 => DampedPreconditioner::new(s, cfg.eta, cfg.floor)?.min_eigenvalue(),
            (_, 0) if cfg.k0_mode == ZeroRankMode::EtaScaled => 1.0 / cfg.eta,
            _ => 1.0,
        };
        if rec.clamped {
            clamp_events += 1;
        }
        min_lambda = min_lambda.min(lambda_min);
        if lambda_min < 1.0 / (l + cfg.eta) * (1.0 - 1e-12) {
            fallback_ok = false;
        }
        let f_next = match problem.loss(&theta, &batch) {
            Ok(f) => f,
            Err(_) => {
                violations += 1;
                min_margin = f64::NEG_INFINITY;
                break;
            }
        };
        let bound = 0.5 * alpha * lambda_min * rec.grad_norm * rec.grad_norm;
        let margin = (f_prev - f_next) - bound;
        min_margin = min_margin.min(margin);
        if margin < -DESCENT_SLACK {
            violations += 1;
        }
        f_prev = f_next;
    }
    rep.set("alpha", alpha);
    rep.set("alpha_sufficient", alpha_star);
    rep.set("steps", steps as f64);
    rep.set("min_margin", min_margin);
    rep.set("violations", violations as f64);
    rep.set("lambda_min_m", min_lambda);
    rep.set("fallback_lambda_bound_holds", if fallback_ok { 1.0 } else { 0.0 });
    rep.set("clamp_events", clamp_events as f64);
    rep.set("f0", f0);
    rep.set("f_final", f_prev);
    rep.pass = violations == 0;
    if clamp_events > 0 {
        rep.note = Some("clamped preconditioner denominators were used".into());
    }
    Ok(rep)
}

/// Stationarity-rate check: `c_T = T · min_{t<T} ‖g_t‖²` must stay below
/// `bound_factor · (f₀ − f̂)/α` and grow at most `2·growth_slack` per doubling.
#[derive(Debug, Clone)]
pub struct StationarityOptions {
    pub horizons: Vec<usize>,
    pub bound_factor: f64,
    pub growth_slack: f64,
    /// Loss above `divergence_factor · f₀` counts as divergence.
    pub divergence_factor: f64,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        StationarityOptions {
            horizons: vec![100, 200, 400, 800],
            bound_factor: 4.0,
            growth_slack: 1.1,
            divergence_factor: 10.0,
        }
    }
}

pub fn check_stationarity_rate(
    problem: &dyn Problem,
    cfg: &CaoConfig,
    theta0: &[f64],
    opts: &StationarityOptions,
) -> Result<TheoryReport> {
    let horizon = *opts.horizons.iter().max().ok_or_else(|| Error::contract("no horizons given"))?;
    let batch = Batch::full();
    let mut opt = Cao::new(cfg.clone());
    let mut theta = ParamVector(theta0.to_vec());
    let f0 = problem.loss(&theta, &batch)?;
    let mut f_best = f0;
    let mut grad_sq = Vec::with_capacity(horizon);
    let mut diverged = false;
    for _ in 0..horizon {
        match opt.step(problem, &mut theta, &batch) {
            Ok(rec) => {
                grad_sq.push(rec.grad_norm * rec.grad_norm);
                f_best = f_best.min(rec.loss);
                if rec.loss > opts.divergence_factor * f0.abs().max(f64::MIN_POSITIVE) {
                    diverged = true;
                    break;
                }
            }
            Err(Error::Diverged { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if let Ok(f) = problem.loss(&theta, &batch) {
        f_best = f_best.min(f);
    }
    let mut rep = TheoryReport::new("stationarity_rate", opts.growth_slack);
    rep.set("alpha", cfg.alpha);
    rep.set("f0", f0);
    rep.set("f_best", f_best);
    rep.set("diverged", if diverged { 1.0 } else { 0.0 });
    let bound = opts.bound_factor * (f0 - f_best) / cfg.alpha;
    rep.set("c_bound", bound);
    let mut pass = !diverged;
    let mut horizons = opts.horizons.clone();
    horizons.sort_unstable();
    let mut c_prev: Option<(usize, f64)> = None;
    for &t in &horizons {
        if t > grad_sq.len() {
            pass = false;
            continue;
        }
        let min_sq = grad_sq[..t].iter().copied().fold(f64::INFINITY, f64::min);
        let c_t = t as f64 * min_sq;
        rep.set(&format!("c_t_{t:04}"), c_t);
        if c_t > bound {
            pass = false;
        }
        if let Some((tp, cp)) = c_prev {
            let allowed = (t as f64 / tp as f64) * opts.growth_slack * cp;
            if c_t > allowed {
                pass = false;
            }
        }
        c_prev = Some((t, c_t));
    }
    rep.pass = pass;
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct ContractionOptions {
    pub windows: usize,
    /// Required `γ`; every window must satisfy `ρ_r ≤ 1 − gamma_min`.
    pub gamma_min: f64,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        ContractionOptions { windows: 6, gamma_min: 1e-3 }
    }
}

/// Runs full-batch CAO on a PL problem and measures the loss-gap ratio
/// `ρ_r = (f_{r+1} − f*)/(f_r − f*)` between consecutive refresh steps.
pub fn check_pl_contraction(
    problem: &dyn Problem,
    cfg: &CaoConfig,
    theta0: &[f64],
    opts: &ContractionOptions,
) -> Result<TheoryReport> {
    let meta = problem.meta();
    let (Some(f_star), Some(mu)) = (meta.f_star, meta.pl_mu) else {
        return Err(Error::Unsupported(format!("`{}` is not a known PL instance", meta.name)));
    };
    let batch = Batch::full();
    let mut opt = Cao::new(cfg.clone());
    let mut theta = ParamVector(theta0.to_vec());
    let mut gaps = vec![problem.loss(&theta, &batch)? - f_star];
    let mut residual = None;
    for _ in 0..opts.windows {
        for _ in 0..cfg.m {
            opt.step(problem, &mut theta, &batch)?;
            if residual.is_none() && problem.dim() <= crate::problems::DENSE_ORACLE_CAP {
                let s = opt.sketch().cloned().unwrap_or_else(|| Sketch::empty(problem.dim()));
                residual = Some(residual_curvature(problem, theta0, &s, &batch)?);
            }
        }
        gaps.push(problem.loss(&theta, &batch)? - f_star);
    }
    let mut rep = TheoryReport::new("pl_contraction", opts.gamma_min);
    let mut max_rho = f64::NEG_INFINITY;
    let mut used = 0usize;
    for (r, w) in gaps.windows(2).enumerate() {
        if w[0] < CONTRACTION_FLOOR {
            continue;
        }
        let rho = w[1] / w[0];
        rep.set(&format!("rho_{r:02}"), rho);
        max_rho = max_rho.max(rho);
        used += 1;
    }
    rep.set("windows_used", used as f64);
    rep.set("mu", mu);
    rep.set("alpha", cfg.alpha);
    rep.set("k", cfg.k as f64);
    if let Some(r) = residual {
        rep.set("residual_lambda_perp", r);
    }
    if used == 0 {
        rep.note = Some("every window started below the floating-point floor".into());
        rep.pass = false;
        return Ok(rep);
    }
    let gamma = 1.0 - max_rho;
    rep.set("contraction_gamma", gamma);
    rep.set("max_rho", max_rho);
    rep.pass = max_rho <= 1.0 - opts.gamma_min;
    Ok(rep)
}

/// Stepsize `c / L_eff` for `cfg` at `theta`; see [`effective_smoothness`].
pub fn effective_stepsize(problem: &dyn Problem, theta: &[f64], cfg: &CaoConfig, c: f64) -> Result<f64> {
    let l_eff = effective_smoothness(problem, theta, cfg)?;
    if !(l_eff > 0.0) {
        return Err(Error::contract("effective smoothness is zero"));
    }
    Ok(c / l_eff)
}

/// Quadratics used by the sufficient-descent suite, each with its damping and rank.
pub fn descent_suite() -> Vec<(String, ProblemSpec, CaoConfig)> {
    let base = CaoConfig { m: 50, t_pow: 20, ..Default::default() };
    vec![
        (
            "diag_2_8".into(),
            ProblemSpec::Quadratic { spectrum: vec![2.0, 8.0], fill: None, seed: 0, rotate: false },
            CaoConfig { k: 2, eta: 1.0, ..base.clone() },
        ),
        (
            "skewed_100_10_1".into(),
            ProblemSpec::skewed_quadratic(&[100.0, 10.0], 1.0, 48, 1),
            CaoConfig { k: 1, eta: 10.0, ..base.clone() },
        ),
        (
            "ill_100_80_0.1".into(),
            ProblemSpec::skewed_quadratic(&[100.0, 80.0], 0.1, 48, 2),
            CaoConfig { k: 1, eta: 10.0, ..base.clone() },
        ),
    ]
}

/// Name of the worst-conditioned member of [`descent_suite`].
pub const WORST_CONDITIONED: &str = "ill_100_80_0.1";

/// Runs the standard battery of checks, optionally writing one JSON line per
/// report to `out/theory/reports.jsonl`.
pub fn run_suite(out: Option<&Path>) -> Result<Vec<TheoryReport>> {
    let mut reports = Vec::new();

    // descent lemma: quadratic (exact L) and Rosenbrock (local L)
    let q = ProblemSpec::skewed_quadratic(&[100.0, 10.0], 1.0, 48, 1).build()?;
    let mut cases = Vec::new();
    for i in 0..50u64 {
        let theta = q.initial_point(i).into_inner();
        let direction = q.initial_point(1000 + i).into_inner();
        cases.push(DescentCase { theta, direction, alpha: 0.002 * (i % 7) as f64 });
    }
    let mut r = check_descent_lemma(q.as_ref(), &cases, None)?;
    r.check = "descent_lemma_quadratic".into();
    reports.push(r);

    let rb = ProblemSpec::Rosenbrock { n: 10 }.build()?;
    let mut cases = Vec::new();
    let mut l_local: f64 = 0.0;
    for i in 0..100u64 {
        let theta = rb.initial_point(i).into_inner();
        let direction = rb.grad(&theta, &Batch::full())?.into_inner();
        let alpha = 1e-4 * (1 + i % 5) as f64;
        let end: Vec<f64> = theta.iter().zip(&direction).map(|(t, d)| t - alpha * d).collect();
        let pts: Vec<Vec<f64>> = (0..=8)
            .map(|s| {
                let w = s as f64 / 8.0;
                theta.iter().zip(&end).map(|(a, b)| (1.0 - w) * a + w * b).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        l_local = l_local.max(local_smoothness(rb.as_ref(), &refs, &Batch::full())?);
        cases.push(DescentCase { theta, direction, alpha });
    }
    let mut r = check_descent_lemma(rb.as_ref(), &cases, Some(l_local))?;
    r.check = "descent_lemma_rosenbrock".into();
    reports.push(r);

    // sufficient stepsize on the quadratic suite, plus the 50× negative control
    for (name, spec, cfg) in descent_suite() {
        let p = spec.build()?;
        let theta0 = p.initial_point(0);
        let mut r = check_sufficient_descent(p.as_ref(), &cfg, &theta0, 200, 1.0)?;
        r.check = format!("sufficient_descent_{name}");
        reports.push(r);
        if name == WORST_CONDITIONED {
            let r = check_sufficient_descent(p.as_ref(), &cfg, &theta0, 200, 50.0)?;
            reports.push(r.into_negative_control(format!("sufficient_descent_{name}_50x_control")));
        }
    }

    // stationarity trend on Rosenbrock
    let (cfg, theta0) = stationarity_setup(rb.as_ref())?;
    let mut r = check_stationarity_rate(rb.as_ref(), &cfg, &theta0, &StationarityOptions::default())?;
    r.check = "stationarity_rosenbrock".into();
    reports.push(r);
    let l_est = 0.5 * cfg.eta / cfg.alpha;
    let unstable = CaoConfig { alpha: 10.0 / l_est, eta: 1e-3, ..cfg.clone() };
    let r = check_stationarity_rate(rb.as_ref(), &unstable, &theta0, &StationarityOptions::default())?;
    reports.push(r.into_negative_control("stationarity_rosenbrock_unstable_control"));

    // contraction at refresh steps
    for seed in 0..3u64 {
        for (label, cfg) in contraction_variants(seed) {
            let p = contraction_problem().build()?;
            let theta0 = p.initial_point(seed);
            let alpha = effective_stepsize(p.as_ref(), &theta0, &cfg, 1.0)?;
            let cfg = CaoConfig { alpha, ..cfg };
            let mut r = check_pl_contraction(p.as_ref(), &cfg, &theta0, &ContractionOptions::default())?;
            r.check = format!("pl_contraction_{label}_seed{seed}");
            reports.push(r);
        }
    }

    if let Some(out) = out {
        write_reports(out, &reports)?;
    }
    Ok(reports)
}

/// Skewed PL quadratic `[100, 10, 1 × 48]`.
pub fn contraction_problem() -> ProblemSpec {
    ProblemSpec::skewed_quadratic(&[100.0, 10.0], 1.0, 48, 7)
}

/// The η-scaled rank-zero variant and ranks 1 and 3, all with `η = 1, m = 50`.
pub fn contraction_variants(seed: u64) -> Vec<(&'static str, CaoConfig)> {
    let base = CaoConfig { eta: 1.0, m: 50, t_pow: 20, seed, ..Default::default() };
    vec![
        ("k0_eta_scaled", CaoConfig { k: 0, k0_mode: ZeroRankMode::EtaScaled, ..base.clone() }),
        ("k1", CaoConfig { k: 1, ..base.clone() }),
        ("k3", CaoConfig { k: 3, ..base }),
    ]
}

/// Rosenbrock stationarity setup: `η = 1`, `k = 1`, `α = ½·η/L̂` where `L̂`
/// is the largest Hessian norm at the start and at the minimizer.
pub fn stationarity_setup(problem: &dyn Problem) -> Result<(CaoConfig, Vec<f64>)> {
    let theta0 = problem.initial_point(0).into_inner();
    let ones = vec![1.0; problem.dim()];
    let l_est = local_smoothness(problem, &[&theta0, &ones], &Batch::full())?;
    let eta = 1.0;
    let cfg = CaoConfig {
        alpha: stationarity_stepsize(l_est, eta, 0.5)?,
        k: 1,
        m: 20,
        eta,
        t_pow: 20,
        ..Default::default()
    };
    Ok((cfg, theta0))
}

pub fn write_reports(out: &Path, reports: &[TheoryReport]) -> Result<()> {
    let dir = out.join("theory");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("reports.jsonl");
    let mut text = String::new();
    for r in reports {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
