//! Probability that two clones split at time `t` land in the same cluster.

use crate::error::{invalid, Result};
use crate::mixture::GmSpec;
use crate::numerics::adaptive_simpson;

const QUAD_TOL: f64 = 1e-12;

/// `½ ∫ (G₊² + G₋²)/(G₊ + G₋) dy` for the projected mixture with means
/// `±|m| e^{-t}` and variance `Γ_t`.
///
/// The integrand is even, so only `y ≥ 0` is integrated, where it equals
/// `G₊ (1 + r²)/(1 + r)` with `r = G₋/G₊ = exp(-2yc/Γ) ≤ 1`.
pub fn phi_analytic(t: f64, spec: &GmSpec) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    let g = super::gamma(t, spec.sigma);
    let c = spec.m_norm() * (-t).exp();
    if c == 0.0 {
        return Ok(0.5);
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * g).sqrt();
    let f = |y: f64| {
        let gp = norm * (-(y - c).powi(2) / (2.0 * g)).exp();
        let r = (-2.0 * y * c / g).exp();
        gp * (1.0 + r * r) / (1.0 + r)
    };
    let w = c + 12.0 * g.sqrt();
    let v = adaptive_simpson(&f, 0.0, c, QUAD_TOL)? + adaptive_simpson(&f, c, w, QUAD_TOL)?;
    Ok(v.clamp(0.5, 1.0))
}
