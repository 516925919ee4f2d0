//! Effective potential of the scalar overlap and its instability time.

use crate::error::{invalid, Result};
use crate::mixture::GmSpec;
use crate::numerics::log_cosh;

/// Time at which the curvature of `V` at `q = 0` vanishes: `½ ln(2dμ̃²)`.
pub fn landau_tstar(d: usize, mu_tilde: f64) -> Result<f64> {
    let arg = 2.0 * d as f64 * mu_tilde * mu_tilde;
    if !(arg > 1.0) {
        return invalid(format!("2 d mu_tilde^2 = {arg} must exceed 1"));
    }
    Ok(0.5 * arg.ln())
}

/// `V(q, t) = ½q² - 2μ̃² ln cosh(q e^{-t} √d)` and `∂V/∂q`.
pub fn potential_v(q: f64, t: f64, spec: &GmSpec) -> (f64, f64) {
    let k = (-t).exp() * (spec.d as f64).sqrt();
    let mu2 = spec.mu_tilde * spec.mu_tilde;
    let u = q * k;
    (0.5 * q * q - 2.0 * mu2 * log_cosh(u), q - 2.0 * mu2 * k * u.tanh())
}
