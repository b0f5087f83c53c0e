//! Timing risk: an upper bound on the probability that the timing error
//! `ΔT` reaches the alarm limit.
//!
//! The bound has two parts. The Gaussian mass outside `γ` standard
//! deviations in both state dimensions is charged in full (`tail_term`).
//! Inside the truncation the density hill of the corrected error set is
//! covered by stacked polytope slabs, and each slab contributes the area it
//! shares with the unsafe set times its thickness (`slab_mass`).

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::setcore::{PZonotope, Polytope2D, SetError};
use crate::ALARM_LIMIT_S;

/// Number of density slabs used when the caller has no preference.
pub const DEFAULT_LEVELS: usize = 32;

/// State dimension entering the tail term.
const STATE_DIM: i32 = 2;

/// `{(ΔT, ΔṪ) : |ΔT| ≥ alert_limit}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnsafeSet {
    alert_limit: f64,
}

impl UnsafeSet {
    pub fn new(alert_limit: f64) -> Result<Self, SetError> {
        if alert_limit <= 0.0 || !alert_limit.is_finite() {
            return Err(SetError::InvalidParameter {
                name: "alert_limit",
                reason: format!("must be positive and finite, got {alert_limit}"),
            });
        }
        Ok(Self { alert_limit })
    }

    pub fn alert_limit(&self) -> f64 {
        self.alert_limit
    }
}

impl Default for UnsafeSet {
    fn default() -> Self {
        Self {
            alert_limit: ALARM_LIMIT_S,
        }
    }
}

/// How the level polytopes are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskForm {
    /// Each polytope weighted by the thickness of its density slab.
    #[default]
    Slab,
    /// Each polytope weighted by its full top-face density. Over-counts
    /// nested levels; kept for comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskResult {
    pub risk: f64,
    pub tail_term: f64,
    pub slab_mass: f64,
    /// `(level_density, intersection_area)` per level, increasing density.
    pub per_level: Vec<(f64, f64)>,
}

/// Area of `p` inside the unsafe set: clipped against `ΔT ≥ AL` and
/// `−ΔT ≥ AL` separately.
pub fn halfplane_clip_area(p: &Polytope2D, b: &UnsafeSet) -> f64 {
    let al = b.alert_limit;
    let right = p.clip_halfplane(&Vector2::new(1.0, 0.0), al).area();
    let left = p.clip_halfplane(&Vector2::new(-1.0, 0.0), al).area();
    right + left
}

/// `1 − erf(γ/√2)^(2n)` for the planar state.
pub fn tail_term(gamma: f64) -> f64 {
    1.0 - erf(gamma / std::f64::consts::SQRT_2).powi(2 * STATE_DIM)
}

pub fn timing_risk(err_corr: &PZonotope, b: &UnsafeSet, gamma: f64, levels: usize) -> Result<RiskResult, SetError> {
    timing_risk_with(err_corr, b, gamma, levels, RiskForm::Slab)
}

pub fn timing_risk_with(
    err_corr: &PZonotope,
    b: &UnsafeSet,
    gamma: f64,
    levels: usize,
    form: RiskForm,
) -> Result<RiskResult, SetError> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(SetError::InvalidParameter {
            name: "gamma",
            reason: format!("must be positive, got {gamma}"),
        });
    }
    let stack = err_corr.overapprox_leveled_polytopes(gamma, levels)?;
    let mut slab_mass = 0.0;
    let mut per_level = Vec::with_capacity(stack.len());
    for lp in &stack {
        let area = halfplane_clip_area(&lp.polytope, b);
        let weight = match form {
            RiskForm::Slab => lp.density_increment,
            RiskForm::Literal => lp.level_density,
        };
        slab_mass += area * weight;
        per_level.push((lp.level_density, area));
    }
    let tail_term = tail_term(gamma);
    Ok(RiskResult {
        risk: tail_term + slab_mass,
        tail_term,
        slab_mass,
        per_level,
    })
}
