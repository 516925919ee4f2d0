//! Small numerical building blocks: quadrature, bracketing root search,
//! log-sum-exp and mergeable running moments.

use crate::error::{invalid, Error, Result};

/// Terms more than this far below the running maximum are skipped in
/// log-sum-exp. `n * exp(-50)` stays below one ulp for any desk-scale `n`.
pub const LSE_CUTOFF: f64 = 50.0;

/// `ln Σ exp(v_i)` with max-shift. Returns the shift alongside the value.
pub fn log_sum_exp(values: &[f64]) -> (f64, f64) {
    let shift = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return (shift, shift);
    }
    let sum: f64 = values
        .iter()
        .filter(|&&v| v - shift > -LSE_CUTOFF)
        .map(|&v| (v - shift).exp())
        .sum();
    (shift + sum.ln(), shift)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return invalid(format!("bad quadrature interval [{a}, {b}]"));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0_f64;
    let v = simpson_step(f, a, b, fa, fm, fb, whole, tol, 50, &mut worst);
    if worst > tol {
        return Err(Error::Quadrature { estimate: worst });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    if depth == 0 {
        *worst = worst.max(diff.abs() / 15.0);
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}

/// Bisection for a sign change of `f` on `[lo, hi]`, to interval width `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoCrossing(format!(
            "f({lo}) = {flo} and f({hi}) = {fhi} do not bracket a root"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Count, mean and centred second moment; partitions merge exactly in a
/// fixed order so parallel reductions are reproducible.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        RunningStats { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// `ln cosh(u)` without overflow.
pub fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_gaussian() {
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = adaptive_simpson(&f, -12.0, 12.0, 1e-13).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), epsilon = 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-10).is_err());
    }

    #[test]
    fn lse_matches_naive_and_survives_large_spread() {
        let v = [0.1, -0.3, 1.2];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(&v).0, naive, epsilon = 1e-15);
        let (lse, shift) = log_sum_exp(&[-1000.0, -1001.0, -5000.0]);
        assert_eq!(shift, -1000.0);
        assert_relative_eq!(lse, -1000.0 + (1.0 + (-1f64).exp()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn running_stats_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let all: RunningStats = xs.iter().copied().collect();
        let a: RunningStats = xs[..333].iter().copied().collect();
        let b: RunningStats = xs[333..].iter().copied().collect();
        let m = a.merge(&b);
        assert_eq!(m.count(), all.count());
        assert_relative_eq!(m.mean(), all.mean(), epsilon = 1e-12);
        assert_relative_eq!(m.variance(), all.variance(), epsilon = 1e-10);
    }

    #[test]
    fn log_cosh_is_overflow_safe() {
        assert_relative_eq!(log_cosh(0.3), 0.3f64.cosh().ln(), epsilon = 1e-15);
        assert_relative_eq!(log_cosh(-2.0), 2f64.cosh().ln(), epsilon = 1e-14);
        assert_relative_eq!(log_cosh(1e4), 1e4 - std::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(log_cosh(0.0), 0.0);
    }
}
