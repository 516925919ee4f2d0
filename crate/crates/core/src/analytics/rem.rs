//! Random-energy-model view of the partition sum over non-own atoms:
//! cumulant generating functions, their Legendre transforms, and the
//! free energies `ψ_±` with condensation.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mixture::GmSpec;
use crate::numerics::{log_sum_exp, RunningStats};
use crate::rng::{fill_standard_normal, RngPolicy};
use crate::time::delta_unchecked;

/// Which cluster the summed atoms belong to, relative to the own atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Regime of the free energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RemBranch {
    Annealed,
    Condensed,
}

impl std::fmt::Display for RemBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RemBranch::Annealed => "annealed",
            RemBranch::Condensed => "condensed",
        })
    }
}

/// `(Δ_t, σ_t², M)` with `M = 0` on the plus branch.
fn parts(t: f64, spec: &GmSpec, branch: Branch) -> (f64, f64, f64) {
    let m = match branch {
        Branch::Plus => 0.0,
        Branch::Minus => spec.m_t(t),
    };
    (delta_unchecked(t), spec.sigma_t2(t), m)
}

fn check_pole(delta: f64, s: f64, lambda: f64) -> Result<f64> {
    let den = delta + lambda * s;
    if !(den > 0.0) {
        return invalid(format!("lambda = {lambda} is at or beyond the pole -Δ/σ_t²"));
    }
    Ok(den)
}

/// Scaled cumulant generating function of the energy density.
pub fn g_lambda(t: f64, lambda: f64, spec: &GmSpec, branch: Branch) -> Result<f64> {
    let (delta, s, m) = parts(t, spec, branch);
    let den = check_pole(delta, s, lambda)?;
    Ok(0.5 * (delta / den).ln() - 0.5 * lambda * (delta + s + m) / den)
}

/// `ε*(λ) = -dg/dλ`.
pub fn eps_star(t: f64, lambda: f64, spec: &GmSpec, branch: Branch) -> Result<f64> {
    let (delta, s, m) = parts(t, spec, branch);
    let den = check_pole(delta, s, lambda)?;
    // Δ² + 2Δσ² + λσ⁴ written around (Δ + σ²)² so that ε*(1) = ½ exactly.
    let base = (delta + s) * (delta + s);
    Ok((base + (lambda - 1.0) * s * s + m * delta) / (2.0 * den * den))
}

fn discriminant(delta: f64, s: f64, m: f64, eps: f64) -> f64 {
    (s * s + 8.0 * eps * delta * (delta + s) + 8.0 * delta * m * eps).sqrt()
}

/// Inverse of [`eps_star`] in `λ`.
pub fn lambda_star(t: f64, eps: f64, spec: &GmSpec, branch: Branch) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("energy density must be positive, got {eps}"));
    }
    let (delta, s, m) = parts(t, spec, branch);
    if !(s > 0.0) {
        return invalid("σ_t² underflowed: ε*(λ) is constant and cannot be inverted");
    }
    let a = discriminant(delta, s, m, eps);
    let b = 4.0 * eps * delta - s;
    if b <= 0.0 {
        Ok((a - b) / (4.0 * s * eps))
    } else {
        // Rationalised to avoid cancellation in a - b.
        Ok(2.0 * delta * (delta + 2.0 * s + m - 2.0 * eps * delta) / (s * (a + b)))
    }
}

/// Rate function `f_t(ε) = -g(λ*) - λ* ε`, in closed form.
pub fn f_eps(t: f64, eps: f64, spec: &GmSpec, branch: Branch) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("energy density must be positive, got {eps}"));
    }
    let (delta, s, m) = parts(t, spec, branch);
    if !(s > 0.0) {
        return invalid("σ_t² underflowed");
    }
    let a = discriminant(delta, s, m, eps);
    // Both brackets of the numerator are differences X - Y that vanish as
    // σ_t → 0; when Y > 0 they are evaluated as (X² - Y²)/(X + Y) with the
    // polynomial X² - Y² expanded by hand.
    let x = (1.0 + 2.0 * eps) * a;
    let y = 8.0 * eps * delta - (1.0 - 6.0 * eps) * s;
    let own = if y > 0.0 {
        let poly = 2.0 * s * s + delta * delta * (1.0 - 2.0 * eps) + delta * s * (3.0 - 2.0 * eps);
        (8.0 * eps * (1.0 - 2.0 * eps) * poly + (1.0 + 2.0 * eps).powi(2) * 8.0 * eps * delta * m) / (x + y)
    } else {
        x - y
    };
    let y2 = 8.0 * eps * delta - s;
    let other = if y2 > 0.0 {
        8.0 * eps * delta * (delta + 3.0 * s + m - 8.0 * eps * delta) / (a + y2)
    } else {
        a - y2
    };
    Ok((delta * own + m * other) / (2.0 * s * (s + a)) - 0.5 * (4.0 * delta * eps / (s + a)).ln())
}

/// `½ ln(1 + σ²/(e^{2α} - 1))`: where the annealed `ψ_+` reaches `-½`.
pub fn t_cond_from_alpha(alpha: f64, sigma: f64) -> f64 {
    0.5 * (sigma * sigma / (2.0 * alpha).exp_m1()).ln_1p()
}

fn annealed_plus(t: f64, alpha: f64, spec: &GmSpec) -> f64 {
    let delta = delta_unchecked(t);
    alpha + 0.5 * (delta / (delta + spec.sigma_t2(t))).ln() - 0.5
}

/// Same-cluster free energy density: annealed for `t >= t_cond`, `-½` below.
pub fn psi_plus(t: f64, alpha: f64, spec: &GmSpec) -> f64 {
    if t >= t_cond_from_alpha(alpha, spec.sigma) {
        annealed_plus(t, alpha, spec)
    } else {
        -0.5
    }
}

/// Annealed `ψ_+` at every `t`, without the branch switch.
pub fn psi_plus_annealed(t: f64, alpha: f64, spec: &GmSpec) -> f64 {
    annealed_plus(t, alpha, spec)
}

/// Opposite-cluster free energy density, switching at the same `t_cond`.
pub fn psi_minus(t: f64, alpha: f64, spec: &GmSpec) -> f64 {
    let delta = delta_unchecked(t);
    let g = delta + spec.sigma_t2(t);
    let m = spec.m_t(t);
    if t >= t_cond_from_alpha(alpha, spec.sigma) {
        annealed_plus(t, alpha, spec) - 0.5 * m / g
    } else {
        -0.5 * (1.0 + delta * m / (g * g))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemEvaluation {
    pub t: f64,
    pub alpha: f64,
    pub branch: RemBranch,
    pub psi_plus: f64,
    pub psi_minus: f64,
    pub t_cond: f64,
}

pub fn rem_evaluate(t: f64, alpha: f64, spec: &GmSpec) -> Result<RemEvaluation> {
    spec.validate()?;
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if !(t > 0.0) {
        return invalid(format!("need t > 0, got {t}"));
    }
    let t_cond = t_cond_from_alpha(alpha, spec.sigma);
    let branch = if t >= t_cond {
        RemBranch::Annealed
    } else {
        RemBranch::Condensed
    };
    Ok(RemEvaluation {
        t,
        alpha,
        branch,
        psi_plus: psi_plus(t, alpha, spec),
        psi_minus: psi_minus(t, alpha, spec),
        t_cond,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemSample {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

pub const DEFAULT_REM_REPS: usize = 32;

/// Samples `(1/d) ln Z_{2…n}` with `Z_{2…n} = Σ_{μ≥2} exp(-|x - a_μ e^{-t}|²/(2Δ_t))`,
/// `x = a_1 e^{-t} + √Δ_t z`, the own atom `a_1` in the plus cluster and fresh
/// atoms and noise per repetition.
pub fn rem_brute_force(t: f64, spec: &GmSpec, n: usize, reps: usize, policy: &RngPolicy) -> Result<RemSample> {
    spec.validate()?;
    if n < 2 || reps < 2 {
        return invalid(format!("need n >= 2 and reps >= 2, got n={n}, reps={reps}"));
    }
    if !(t > 0.0) {
        return invalid(format!("need t > 0, got {t}"));
    }
    let d = spec.d;
    let delta = delta_unchecked(t);
    let c = (-t).exp();
    let sample = |rep: usize| {
        let mut rng = policy.stream("rem", rep as u64);
        let mut x = vec![0.0; d];
        let mut z = vec![0.0; d];
        fill_standard_normal(&mut rng, &mut x);
        fill_standard_normal(&mut rng, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = (spec.mu_tilde + spec.sigma * *xi) * c + delta.sqrt() * zi;
        }
        let mut energies = Vec::with_capacity(n - 1);
        let mut a = vec![0.0; d];
        for _ in 1..n {
            let sign = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
            fill_standard_normal(&mut rng, &mut a);
            let d2: f64 = x
                .iter()
                .zip(&a)
                .map(|(xi, ai)| (xi - (sign * spec.mu_tilde + spec.sigma * ai) * c).powi(2))
                .sum();
            energies.push(-d2 / (2.0 * delta));
        }
        log_sum_exp(&energies).0 / d as f64
    };
    let values: Vec<f64> = (0..reps).into_par_iter().map(sample).collect();
    let stats: RunningStats = values.into_iter().collect();
    Ok(RemSample {
        mean: stats.mean(),
        std_error: stats.std_error(),
        reps,
    })
}
