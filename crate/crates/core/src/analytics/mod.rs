//! Closed-form theory for the symmetric two-cluster mixture.

pub mod landau;
pub mod phi;
pub mod rem;

use crate::error::{invalid, Result};
use crate::time::delta_unchecked;

pub use landau::{landau_tstar, potential_v};
pub use phi::phi_analytic;
pub use rem::{
    eps_star, f_eps, g_lambda, lambda_star, psi_minus, psi_plus, rem_brute_force, rem_evaluate, t_cond_from_alpha,
    Branch, RemBranch, RemEvaluation, RemSample,
};

/// `Γ_t = Δ_t + σ² e^{-2t}`.
pub fn gamma(t: f64, sigma: f64) -> f64 {
    delta_unchecked(t) + sigma * sigma * (-2.0 * t).exp()
}

/// Collapse time `½ ln(1 + σ²/(n^{2/d} - 1))`.
pub fn tc_closed_form(n: usize, d: usize, sigma: f64) -> Result<f64> {
    if n < 2 {
        return invalid(format!("collapse time needs n >= 2, got {n}"));
    }
    if d == 0 {
        return invalid("d must be at least 1");
    }
    Ok(t_cond_from_alpha(crate::time::alpha_param(n, d), sigma))
}

/// Large-d excess entropy `α + ½ ln(Δ_t/Γ_t)` of the well-separated mixture.
pub fn gm_excess_entropy_analytic(t: f64, n: usize, d: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    if !(t > 0.0) {
        return invalid(format!("need t > 0, got {t}"));
    }
    let alpha = crate::time::alpha_param(n, d);
    Ok(alpha + 0.5 * (delta_unchecked(t) / gamma(t, sigma)).ln())
}
