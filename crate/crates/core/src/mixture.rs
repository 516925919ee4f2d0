//! The symmetric two-cluster Gaussian mixture `±m + σz`, `m = (μ̃, …, μ̃)`.

use ndarray::Array2;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::rng::fill_standard_normal;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmSpec {
    pub mu_tilde: f64,
    pub sigma: f64,
    pub d: usize,
}

impl GmSpec {
    pub fn new(mu_tilde: f64, sigma: f64, d: usize) -> Result<Self> {
        let spec = Self { mu_tilde, sigma, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.mu_tilde >= 0.0 && self.mu_tilde.is_finite()) {
            return invalid(format!("mu_tilde must be non-negative, got {}", self.mu_tilde));
        }
        if self.d == 0 {
            return invalid("d must be at least 1");
        }
        Ok(())
    }

    /// `|m| = μ̃ √d`.
    pub fn m_norm(&self) -> f64 {
        self.mu_tilde * (self.d as f64).sqrt()
    }

    pub fn m_vec(&self) -> Vec<f64> {
        vec![self.mu_tilde; self.d]
    }

    /// `σ² e^{-2t}`.
    pub fn sigma_t2(&self, t: f64) -> f64 {
        self.sigma * self.sigma * (-2.0 * t).exp()
    }

    /// `4 μ̃² e^{-2t}`.
    pub fn m_t(&self, t: f64) -> f64 {
        4.0 * self.mu_tilde * self.mu_tilde * (-2.0 * t).exp()
    }
}

/// Draws `n` rows `s·m + σz` with a fair sign `s`; label 1 for `+`, 0 for `-`.
/// Consumes the stream row by row, so output depends only on the stream.
pub fn sample_gaussian_mixture<R: Rng + ?Sized>(spec: &GmSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let d = spec.d;
    let mut data = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    for row in data.chunks_exact_mut(d) {
        let plus = rng.random::<bool>();
        let s = if plus { spec.mu_tilde } else { -spec.mu_tilde };
        fill_standard_normal(rng, row);
        for v in row.iter_mut() {
            *v = s + spec.sigma * *v;
        }
        labels.push(u8::from(plus));
    }
    Dataset::new(Array2::from_shape_vec((n, d), data).expect("shape"), Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngPolicy;

    #[test]
    fn tiny_sigma_gives_exact_centres() {
        let spec = GmSpec {
            mu_tilde: 0.7,
            sigma: 1e-300,
            d: 3,
        };
        let ds = sample_gaussian_mixture(&spec, 4, &mut RngPolicy::new(1).stream("gm", 0)).unwrap();
        for (mu, l) in ds.labels().unwrap().iter().enumerate() {
            let want = if *l == 1 { 0.7 } else { -0.7 };
            assert!(ds.row(mu).iter().all(|v| *v == want));
        }
    }

    #[test]
    fn mean_within_clt_bound() {
        let spec = GmSpec::new(1.0, 1.0, 4).unwrap();
        let n = 100_000;
        let ds = sample_gaussian_mixture(&spec, n, &mut RngPolicy::new(2).stream("gm", 0)).unwrap();
        let mean = ds.rows().mean_axis(ndarray::Axis(0)).unwrap();
        // Per-coordinate variance of a row is σ² + μ̃².
        let bound = 4.0 * (2.0f64 / n as f64).sqrt();
        assert!(mean.iter().all(|m| m.abs() < bound), "{mean}");
        let plus = ds.labels().unwrap().iter().filter(|l| **l == 1).count() as f64 / n as f64;
        assert!((plus - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn reproducible_from_policy() {
        let spec = GmSpec::new(1.0, 0.5, 5).unwrap();
        let p = RngPolicy::new(9);
        let a = sample_gaussian_mixture(&spec, 50, &mut p.stream("gm", 0)).unwrap();
        let b = sample_gaussian_mixture(&spec, 50, &mut p.stream("gm", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(GmSpec::new(1.0, 0.0, 2).is_err());
        assert!(GmSpec::new(-1.0, 1.0, 2).is_err());
        assert!(GmSpec::new(1.0, 1.0, 0).is_err());
    }
}
