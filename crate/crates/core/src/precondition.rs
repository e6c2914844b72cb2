//! Damped low-rank inverse `P = (B + ηI)⁻¹` applied in the sketch eigenbasis.
//!
//! With `B = Σ λᵢ vᵢ vᵢᵀ`, `P g = Σ ⟨g,vᵢ⟩/dᵢ · vᵢ + (g − VVᵀg)/η` where
//! `dᵢ = max(λᵢ + η, floor)`. The floor keeps `P` positive definite when a
//! Ritz value is negative enough that `λᵢ + η ≤ 0`; such directions are
//! reported as clamped.

use crate::error::{Error, Result};
use crate::linalg;
use crate::sketch::Sketch;

pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct DampedPreconditioner<'a> {
    sketch: &'a Sketch,
    eta: f64,
    floor: f64,
}

impl<'a> DampedPreconditioner<'a> {
    pub fn new(sketch: &'a Sketch, eta: f64, floor: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::contract(format!("damping must be positive, got {eta}")));
        }
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::contract(format!("denominator floor must be positive, got {floor}")));
        }
        Ok(DampedPreconditioner { sketch, eta, floor })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sketch(&self) -> &Sketch {
        self.sketch
    }

    /// Effective denominators `max(λᵢ + η, floor)`.
    pub fn denominators(&self) -> Vec<f64> {
        self.sketch.eigvals.iter().map(|l| (l + self.eta).max(self.floor)).collect()
    }

    /// True when at least one direction hit the floor.
    pub fn clamped(&self) -> bool {
        self.sketch.eigvals.iter().any(|l| l + self.eta < self.floor)
    }

    fn check(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.sketch.dim() {
            return Err(Error::contract(format!(
                "gradient length {} vs sketch dim {}",
                g.len(),
                self.sketch.dim()
            )));
        }
        if !linalg::all_finite(g) {
            return Err(Error::non_finite("gradient passed to preconditioner"));
        }
        Ok(())
    }

    /// `P g`, in `O(nk)`.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check(g)?;
        // Split off the captured part first: adding a 1/d - 1/eta correction
        // to g/eta cancels badly when eta is small.
        let coeffs = self.sketch.project(g);
        let mut perp = g.to_vec();
        for (c, v) in coeffs.iter().zip(&self.sketch.basis) {
            linalg::axpy(-c, v, &mut perp);
        }
        let inv_eta = 1.0 / self.eta;
        let mut d: Vec<f64> = perp.iter().map(|x| x * inv_eta).collect();
        for ((c, den), v) in coeffs.iter().zip(self.denominators()).zip(&self.sketch.basis) {
            linalg::axpy(c / den, v, &mut d);
        }
        Ok(d)
    }

    /// `⟨g, P g⟩ = Σ ⟨g,vᵢ⟩²/dᵢ + ‖g_⊥‖²/η`.
    pub fn quadratic_form(&self, g: &[f64]) -> Result<f64> {
        self.check(g)?;
        let coeffs = self.sketch.project(g);
        let captured: f64 = coeffs.iter().map(|c| c * c).sum();
        let perp_sq = (linalg::dot(g, g) - captured).max(0.0);
        let inside: f64 = coeffs.iter().zip(self.denominators()).map(|(c, den)| c * c / den).sum();
        Ok(inside + perp_sq / self.eta)
    }

    /// `‖P‖₂ = max(1/η, 1/min dᵢ)`.
    pub fn operator_norm_bound(&self) -> f64 {
        let min_den = self.denominators().into_iter().fold(f64::INFINITY, f64::min);
        (1.0 / self.eta).max(1.0 / min_den)
    }

    /// `λ_min(P) = 1 / max(max dᵢ, η)`.
    pub fn min_eigenvalue(&self) -> f64 {
        let max_den = self.denominators().into_iter().fold(self.eta, f64::max);
        1.0 / max_den
    }
}

/// Free-function form of [`DampedPreconditioner::apply`].
pub fn precondition(g: &[f64], pc: &DampedPreconditioner<'_>) -> Result<Vec<f64>> {
    pc.apply(g)
}
