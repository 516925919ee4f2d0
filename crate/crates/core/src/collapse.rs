//! Entropy-based collapse time, nearest-atom statistics and atom-level cloning.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::nearest::{nearest_atom, NearestNeighborTrace};
use crate::numerics::RunningStats;
use crate::rng::{fill_standard_normal, RngPolicy};
use crate::score::EmpiricalDensity;
use crate::sde::BackwardConfig;
use crate::speciation::{phi_from_endpoints, PhiCurve};
use crate::time::{alpha_param, delta_unchecked};

/// Forward samples per independent stream in [`entropy_mc`].
pub const ENTROPY_CHUNK: usize = 512;
pub const DEFAULT_N_PRIME: usize = 50_000;
pub const MIN_N_PRIME: usize = 100;
pub const MIN_TRACES: usize = 100;

/// Entropy per variable of `n` well-separated Gaussians of variance `Δ_t`.
pub fn s_sep(t: f64, n: usize, d: usize) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("s_sep needs t > 0, got {t}"));
    }
    if n == 0 || d == 0 {
        return invalid("n and d must be positive");
    }
    Ok(alpha_param(n, d) + 0.5 + 0.5 * (2.0 * std::f64::consts::PI * delta_unchecked(t)).ln())
}

/// Mean and standard error of `-(1/d) ln P_t^e(x)` over `n_prime` forward
/// samples. Samples are drawn in fixed-size chunks, chunk `j` from stream
/// `(policy, "entropy", j)`, and partial moments merge in chunk order.
pub fn entropy_mc(density: &EmpiricalDensity, t: f64, n_prime: usize, policy: &RngPolicy) -> Result<(f64, f64)> {
    if n_prime < MIN_N_PRIME {
        return invalid(format!("n' must be at least {MIN_N_PRIME}, got {n_prime}"));
    }
    if !(t > 0.0) {
        return invalid(format!("entropy needs t > 0, got {t}"));
    }
    let data = density.dataset();
    let (n, d) = (data.n(), data.d());
    let (c, s) = ((-t).exp(), delta_unchecked(t).sqrt());
    let chunks = n_prime.div_ceil(ENTROPY_CHUNK);
    let parts: Vec<RunningStats> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let m = ENTROPY_CHUNK.min(n_prime - j * ENTROPY_CHUNK);
            let mut rng = policy.stream("entropy", j as u64);
            let mut xs = Array2::<f64>::zeros((m, d));
            for mut row in xs.outer_iter_mut() {
                let mu = rng.random_range(0..n);
                let x = row.as_slice_mut().expect("contiguous");
                fill_standard_normal(&mut rng, x);
                for (xi, ai) in x.iter_mut().zip(data.row(mu)) {
                    *xi = ai * c + s * *xi;
                }
            }
            let logp = density.batch_log_density(xs.view(), t)?;
            Ok(logp.iter().map(|l| -l / d as f64).collect())
        })
        .collect::<Result<_>>()?;
    let total = parts.iter().fold(RunningStats::default(), |acc, p| acc.merge(p));
    Ok((total.mean(), total.std_error()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyCurve {
    pub times: Vec<f64>,
    pub s_emp: Vec<f64>,
    pub s_emp_se: Vec<f64>,
    pub s_sep: Vec<f64>,
    /// `s_sep - s_emp`; its standard error is `s_emp_se`.
    pub f_excess: Vec<f64>,
    /// Zero for closed-form curves.
    pub n_prime: usize,
    pub alpha: f64,
    /// Level at which the crossing is read.
    pub floor: f64,
}

/// Finite-size level of the excess entropy at the crossing: `ln 2 / d`,
/// the value of `(1/d) E ln(1 + Z_rest/Z_own)` when both sums balance.
pub fn finite_size_floor(d: usize) -> f64 {
    std::f64::consts::LN_2 / d as f64
}

/// Monte-Carlo excess entropy at each time; time `k` draws from
/// `(policy, "entropy-time", k)`.
pub fn excess_entropy_curve(
    density: &EmpiricalDensity,
    times: &[f64],
    n_prime: usize,
    policy: &RngPolicy,
) -> Result<EntropyCurve> {
    let data = density.dataset();
    let (n, d) = (data.n(), data.d());
    let mut curve = EntropyCurve {
        times: times.to_vec(),
        s_emp: Vec::new(),
        s_emp_se: Vec::new(),
        s_sep: Vec::new(),
        f_excess: Vec::new(),
        n_prime,
        alpha: alpha_param(n, d),
        floor: finite_size_floor(d),
    };
    for (k, &t) in times.iter().enumerate() {
        let (s, se) = entropy_mc(density, t, n_prime, &policy.derive("entropy-time", k as u64))?;
        let sep = s_sep(t, n, d)?;
        curve.s_emp.push(s);
        curve.s_emp_se.push(se);
        curve.s_sep.push(sep);
        curve.f_excess.push(sep - s);
    }
    Ok(curve)
}

/// Noise-free curve from the closed-form mixture excess entropy.
pub fn analytic_entropy_curve(times: &[f64], n: usize, d: usize, sigma: f64) -> Result<EntropyCurve> {
    let mut curve = EntropyCurve {
        times: times.to_vec(),
        s_emp: Vec::new(),
        s_emp_se: vec![0.0; times.len()],
        s_sep: Vec::new(),
        f_excess: Vec::new(),
        n_prime: 0,
        alpha: alpha_param(n, d),
        floor: 0.0,
    };
    for &t in times {
        let f = crate::analytics::gm_excess_entropy_analytic(t, n, d, sigma)?;
        let sep = s_sep(t, n, d)?;
        let s = sep - f;
        curve.s_sep.push(sep);
        curve.s_emp.push(s);
        curve.f_excess.push(sep - s);
    }
    Ok(curve)
}

/// Largest grid interval on which `f_excess` leaves the band `floor + 2·SE`,
/// refined by interpolating `f_excess` to `floor` (clamped to the interval).
pub fn collapse_time_from_curve(curve: &EntropyCurve) -> Result<f64> {
    let m = curve.times.len();
    if m < 2 || curve.f_excess.len() != m || curve.s_emp_se.len() != m {
        return invalid("curve needs at least two consistent points");
    }
    let inside: Vec<bool> = (0..m)
        .map(|k| curve.f_excess[k] <= curve.floor + 2.0 * curve.s_emp_se[k])
        .collect();
    if inside.iter().all(|b| !b) {
        return Err(Error::NoCrossing(
            "excess entropy is above the band at every time".into(),
        ));
    }
    if inside.iter().all(|b| *b) {
        return Err(Error::NoCrossing("excess entropy never leaves the band".into()));
    }
    let k = (0..m - 1)
        .rev()
        .find(|&k| inside[k] && !inside[k + 1])
        .ok_or_else(|| Error::NoCrossing("no exit from the band with increasing time".into()))?;
    let (f0, f1) = (curve.f_excess[k], curve.f_excess[k + 1]);
    let s = if f1 != f0 {
        ((curve.floor - f0) / (f1 - f0)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(curve.times[k] + s * (curve.times[k + 1] - curve.times[k]))
}

/// Fraction of clone pairs whose endpoints share their nearest training atom.
pub fn phi_collapse_mc(
    cfg: &BackwardConfig,
    data: &Dataset,
    times: &[f64],
    n_clones: usize,
    policy: &RngPolicy,
) -> Result<PhiCurve> {
    if cfg.dim() != data.d() {
        return invalid("configuration and dataset dimensions differ");
    }
    phi_from_endpoints(cfg, times, n_clones, policy, "phi-c", |a, b| {
        Ok(nearest_atom(a, data).0 == nearest_atom(b, data).0)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct THatHistogram {
    /// `(grid time, count)` in increasing time.
    pub bins: Vec<(f64, usize)>,
    pub mean: f64,
    pub std_error: f64,
}

/// Histogram of per-trace collapse times over the shared grid.
pub fn t_hat_histogram(traces: &[NearestNeighborTrace]) -> Result<THatHistogram> {
    if traces.len() < MIN_TRACES {
        return invalid(format!("need at least {MIN_TRACES} traces, got {}", traces.len()));
    }
    let mut grid: Vec<f64> = traces[0].times.clone();
    grid.sort_by(f64::total_cmp);
    let mut counts = vec![0usize; grid.len()];
    for tr in traces {
        let k = grid
            .binary_search_by(|g| g.total_cmp(&tr.t_hat_c))
            .map_err(|_| Error::InvalidInput("traces do not share a time grid".into()))?;
        counts[k] += 1;
    }
    let stats: RunningStats = traces.iter().map(|t| t.t_hat_c).collect();
    Ok(THatHistogram {
        bins: grid.into_iter().zip(counts).collect(),
        mean: stats.mean(),
        std_error: stats.std_error(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseReport {
    /// Crossing of the excess-entropy curve, or the reason there is none.
    pub t_c: std::result::Result<f64, String>,
    pub mean_t_hat: f64,
    pub t_hat_se: f64,
    pub phi_c: PhiCurve,
    pub histogram: THatHistogram,
}
