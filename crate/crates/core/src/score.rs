//! Noised empirical density `P_t^e` and its exact score.

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::mixture::GmSpec;
use crate::numerics::LSE_CUTOFF;
use crate::time::delta_unchecked;

/// Queries per GEMM block in batched evaluation.
const BATCH_CHUNK: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct LogDensityResult {
    pub log_density: f64,
    /// Posterior responsibilities, summing to one.
    pub weights: Vec<f64>,
    /// Largest per-datum exponent, subtracted before exponentiating.
    pub log_sum_shift: f64,
}

/// `P_t^e` for a fixed training set, with cached row norms.
#[derive(Clone, Debug)]
pub struct EmpiricalDensity<'a> {
    data: &'a Dataset,
    sq_norms: Vec<f64>,
}

fn check_time(t: f64) -> Result<f64> {
    let delta = if t.is_finite() { delta_unchecked(t) } else { f64::NAN };
    if !(delta > 0.0) {
        return invalid(format!("density needs t > 0, got {t}"));
    }
    Ok(delta)
}

impl<'a> EmpiricalDensity<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let sq_norms = data.rows().outer_iter().map(|r| r.dot(&r)).collect();
        Self { data, sq_norms }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    fn check(&self, x: &[f64], t: f64) -> Result<f64> {
        if x.len() != self.data.d() {
            return invalid(format!("query has dimension {}, dataset {}", x.len(), self.data.d()));
        }
        check_time(t)
    }

    /// Per-datum exponents `-|x - a_μ e^{-t}|² / (2Δ_t)`.
    pub fn log_terms(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let delta = self.check(x, t)?;
        let mut out = vec![0.0; self.data.n()];
        self.fill_log_terms(x, t, delta, &mut out);
        Ok(out)
    }

    fn fill_log_terms(&self, x: &[f64], t: f64, delta: f64, out: &mut [f64]) {
        let c = (-t).exp();
        let inv = 0.5 / delta;
        for (mu, e) in out.iter_mut().enumerate() {
            let a = self.data.row(mu);
            let d2: f64 = x.iter().zip(a).map(|(xi, ai)| (xi - c * ai).powi(2)).sum();
            *e = -d2 * inv;
        }
    }

    fn normalizer(&self, delta: f64) -> f64 {
        (self.data.n() as f64).ln() + 0.5 * self.data.d() as f64 * (2.0 * std::f64::consts::PI * delta).ln()
    }

    pub fn log_density(&self, x: &[f64], t: f64) -> Result<LogDensityResult> {
        let delta = self.check(x, t)?;
        let mut weights = vec![0.0; self.data.n()];
        self.fill_log_terms(x, t, delta, &mut weights);
        let (lse, shift) = exponentiate_in_place(&mut weights);
        Ok(LogDensityResult {
            log_density: lse - self.normalizer(delta),
            weights,
            log_sum_shift: shift,
        })
    }

    /// `∇ log P_t^e(x) = Σ_μ w_μ (a_μ e^{-t} - x) / Δ_t`.
    pub fn score(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let delta = self.check(x, t)?;
        let mut out = vec![0.0; x.len()];
        let mut scratch = vec![0.0; self.data.n()];
        self.score_into(x, t, delta, &mut out, &mut scratch);
        Ok(out)
    }

    /// Allocation-free score for inner loops; `scratch` has length `n`.
    pub(crate) fn score_into(&self, x: &[f64], t: f64, delta: f64, out: &mut [f64], scratch: &mut [f64]) {
        self.fill_log_terms(x, t, delta, scratch);
        exponentiate_in_place(scratch);
        let c = (-t).exp();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (mu, &w) in scratch.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let a = self.data.row(mu);
            for ((o, xi), ai) in out.iter_mut().zip(x).zip(a) {
                *o += w * (c * ai - xi);
            }
        }
        out.iter_mut().for_each(|v| *v /= delta);
    }

    /// `log P_t^e` at every row of `xs`. Squared distances come from one
    /// matrix product per block of queries; blocks run in parallel and are
    /// written back in query order.
    pub fn batch_log_density(&self, xs: ArrayView2<f64>, t: f64) -> Result<Vec<f64>> {
        if xs.ncols() != self.data.d() {
            return invalid(format!(
                "queries have dimension {}, dataset {}",
                xs.ncols(),
                self.data.d()
            ));
        }
        let delta = check_time(t)?;
        let starts: Vec<usize> = (0..xs.nrows()).step_by(BATCH_CHUNK).collect();
        let blocks: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&lo| {
                let hi = (lo + BATCH_CHUNK).min(xs.nrows());
                self.block_log_density(xs.slice(s![lo..hi, ..]), t, delta)
            })
            .collect();
        Ok(blocks.concat())
    }

    fn block_log_density(&self, xs: ArrayView2<f64>, t: f64, delta: f64) -> Vec<f64> {
        let c = (-t).exp();
        let cross: Array2<f64> = xs.dot(&self.data.rows().t());
        let inv = 0.5 / delta;
        let norm = self.normalizer(delta);
        let mut terms = vec![0.0; self.data.n()];
        xs.outer_iter()
            .zip(cross.axis_iter(Axis(0)))
            .map(|(x, g)| {
                let xx = x.dot(&x);
                for ((e, &gm), &aa) in terms.iter_mut().zip(g.iter()).zip(&self.sq_norms) {
                    let d2 = (xx - 2.0 * c * gm + c * c * aa).max(0.0);
                    *e = -d2 * inv;
                }
                log_sum_exp_fast(&terms) - norm
            })
            .collect()
    }
}

/// Replaces exponents by normalised weights; returns `(lse, shift)`.
fn exponentiate_in_place(v: &mut [f64]) -> (f64, f64) {
    let shift = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for e in v.iter_mut() {
        let z = *e - shift;
        *e = if z > -LSE_CUTOFF { z.exp() } else { 0.0 };
        sum += *e;
    }
    for e in v.iter_mut() {
        *e /= sum;
    }
    (shift + sum.ln(), shift)
}

fn log_sum_exp_fast(v: &[f64]) -> f64 {
    crate::numerics::log_sum_exp(v).0
}

/// Score of the two-cluster population density at time `t`.
pub fn gm_population_score(spec: &GmSpec, x: &[f64], t: f64) -> Result<Vec<f64>> {
    if x.len() != spec.d {
        return invalid(format!("query has dimension {}, spec {}", x.len(), spec.d));
    }
    if !(t >= 0.0) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    let mut out = vec![0.0; x.len()];
    gm_score_into(spec, x, t, &mut out);
    Ok(out)
}

pub(crate) fn gm_score_into(spec: &GmSpec, x: &[f64], t: f64, out: &mut [f64]) {
    let c = (-t).exp();
    let gamma = delta_unchecked(t) + spec.sigma * spec.sigma * c * c;
    let xm: f64 = spec.mu_tilde * x.iter().sum::<f64>();
    let pull = spec.mu_tilde * c / gamma * (xm * c / gamma).tanh();
    for (o, xi) in out.iter_mut().zip(x) {
        *o = -xi / gamma + pull;
    }
}
