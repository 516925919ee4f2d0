//! Spectral prediction of the speciation time and its measurement by cloning.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::dataset::{Dataset, UNLABELED};
use crate::error::{invalid, Error, Result};
use crate::numerics::bisect;
use crate::rng::RngPolicy;
use crate::sde::{clone_endpoints, BackwardConfig};
use crate::time::TimeSchedule;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 100_000;
/// Finite-size value of `φ` at the speciation time.
pub const DEFAULT_PHI_LEVEL: f64 = 0.775;

/// `(1/n) Σ (a_μ - ā)(a_μ - ā)ᵀ`.
pub fn covariance(data: &Dataset) -> Result<Array2<f64>> {
    if data.n() < 2 {
        return invalid(format!("covariance needs n >= 2, got {}", data.n()));
    }
    let (centered, _) = data.center();
    let x = centered.rows();
    Ok(x.t().dot(x) / data.n() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit vector, sign fixed so its component sum is non-negative.
    pub vector: Array1<f64>,
    pub residual: f64,
    pub iters: usize,
}

/// Top eigenpair of a symmetric PSD matrix by power iteration from a fixed
/// start vector; stops once `|Cv - λv| <= tol·λ`.
pub fn principal_eigenvalue(c: &Array2<f64>, tol: f64, max_iters: usize) -> Result<Eigenpair> {
    let d = c.nrows();
    if d == 0 || c.ncols() != d {
        return invalid(format!("expected a non-empty square matrix, got {:?}", c.dim()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    // Irrational offsets keep the start away from any coordinate-aligned subspace.
    let mut v: Array1<f64> = (0..d)
        .map(|i| 1.0 + (i as f64 * 0.618_033_988_749_895).fract())
        .collect();
    v /= v.dot(&v).sqrt();
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iters {
        let w = c.dot(&v);
        let value = v.dot(&w);
        let r = &w - &(value * &v);
        residual = r.dot(&r).sqrt();
        if residual <= tol * value.abs() || value == 0.0 && residual == 0.0 {
            if v.sum() < 0.0 {
                v.mapv_inplace(|x| -x);
            }
            return Ok(Eigenpair {
                value,
                vector: v,
                residual,
                iters: iter,
            });
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(Eigenpair {
                value: 0.0,
                vector: v,
                residual: 0.0,
                iters: iter,
            });
        }
        v = w / norm;
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
    })
}

/// `½ ln Λ`; `Λ < 1` has no speciation scale.
pub fn speciation_time(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return invalid(format!("eigenvalue must be finite, got {lambda}"));
    }
    if lambda < 1.0 {
        return Err(Error::NoSpeciation { lambda });
    }
    Ok(0.5 * lambda.ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub lambda: f64,
    pub direction: Array1<f64>,
    /// `None` when `Λ < 1`.
    pub t_s: Option<f64>,
    pub residual: f64,
    pub iters: usize,
}

pub fn spectral_report(data: &Dataset) -> Result<SpectralReport> {
    let c = covariance(data)?;
    let e = principal_eigenvalue(&c, POWER_TOL, POWER_MAX_ITERS)?;
    let t_s = speciation_time(e.value).ok();
    Ok(SpectralReport {
        lambda: e.value,
        direction: e.vector,
        t_s,
        residual: e.residual,
        iters: e.iters,
    })
}

/// `C(t) = C₀ e^{-2t} + Δ_t I`.
pub fn noised_covariance(c0: &Array2<f64>, t: f64) -> Result<Array2<f64>> {
    let delta = crate::time::delta(t)?;
    let mut c = c0 * (-2.0 * t).exp();
    c.diag_mut().mapv_inplace(|v| v + delta);
    Ok(c)
}

/// Largest grid time at which the smallest eigenvalue of
/// `M(t) = I - e^{-2t} C` changes sign, refined by bisection.
pub fn landau_instability_time(c: &Array2<f64>, grid: &TimeSchedule) -> Result<f64> {
    let lambda = principal_eigenvalue(c, POWER_TOL, POWER_MAX_ITERS)?.value;
    if !(lambda > 1.0) {
        return Err(Error::NoSpeciation { lambda });
    }
    let m_min = |t: f64| 1.0 - lambda * (-2.0 * t).exp();
    let p = grid.points();
    let k = (1..p.len())
        .rev()
        .find(|&k| m_min(p[k - 1]) <= 0.0 && m_min(p[k]) > 0.0)
        .ok_or_else(|| Error::NoCrossing(format!("instability at {} outside the grid", 0.5 * lambda.ln())))?;
    bisect(m_min, p[k - 1], p[k], 1e-13)
}

/// Assigns a two-class label (0 or 1) to an endpoint.
pub trait Classifier: Sync {
    fn classify(&self, x: &[f64]) -> Result<u8>;
}

/// Class 1 when `direction · x > 0`, class 0 when negative.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionClassifier {
    pub direction: Vec<f64>,
}

impl Classifier for ProjectionClassifier {
    fn classify(&self, x: &[f64]) -> Result<u8> {
        let p: f64 = self.direction.iter().zip(x).map(|(a, b)| a * b).sum();
        if p > 0.0 {
            Ok(1)
        } else if p < 0.0 {
            Ok(0)
        } else {
            Err(Error::Classifier("endpoint lies on the decision boundary".into()))
        }
    }
}

/// Nearest class centroid, trained on labelled rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidClassifier {
    centroids: Vec<(u8, Vec<f64>)>,
}

impl CentroidClassifier {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let labels = data
            .labels()
            .ok_or_else(|| Error::Classifier("dataset has no labels".into()))?;
        let mut classes: Vec<u8> = labels.iter().copied().filter(|&l| l != UNLABELED).collect();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Classifier(format!(
                "need at least two classes, found {}",
                classes.len()
            )));
        }
        let centroids = classes
            .into_iter()
            .map(|c| {
                let idx: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == c).collect();
                let mean = data
                    .rows()
                    .select(Axis(0), &idx)
                    .mean_axis(Axis(0))
                    .expect("non-empty class");
                (c, mean.to_vec())
            })
            .collect();
        Ok(Self { centroids })
    }
}

impl Classifier for CentroidClassifier {
    fn classify(&self, x: &[f64]) -> Result<u8> {
        let dist = |c: &[f64]| -> f64 { c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum() };
        let mut best = (self.centroids[0].0, dist(&self.centroids[0].1));
        for (label, c) in &self.centroids[1..] {
            let dd = dist(c);
            if dd < best.1 {
                best = (*label, dd);
            }
        }
        Ok(best.0)
    }
}

/// Centroid rule when the dataset carries labels; otherwise the sign of the
/// projection on the centred top principal direction.
pub fn default_classifier(data: &Dataset) -> Result<Box<dyn Classifier>> {
    if data.labels().is_some_and(|l| l.iter().any(|&v| v != UNLABELED)) {
        return Ok(Box::new(CentroidClassifier::fit(data)?));
    }
    let report = spectral_report(data)?;
    Ok(Box::new(ProjectionClassifier {
        direction: report.direction.to_vec(),
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiCurve {
    /// Increasing clone times (grid-snapped).
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_clones: usize,
}

/// Binomial standard error `√(p(1-p)/N)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Fraction of clone pairs whose endpoints share a class, per clone time.
/// Pair `i` at time index `j` uses streams derived from `(policy, "phi", j)`,
/// so the curve does not depend on the worker count.
pub fn phi_speciation_mc(
    cfg: &BackwardConfig,
    classifier: &dyn Classifier,
    times: &[f64],
    n_clones: usize,
    policy: &RngPolicy,
) -> Result<PhiCurve> {
    phi_from_endpoints(cfg, times, n_clones, policy, "phi", |a, b| {
        Ok(classifier.classify(a)? == classifier.classify(b)?)
    })
}

/// Shared driver for class- and atom-level clone statistics.
pub(crate) fn phi_from_endpoints<F>(
    cfg: &BackwardConfig,
    times: &[f64],
    n_clones: usize,
    policy: &RngPolicy,
    tag: &str,
    same: F,
) -> Result<PhiCurve>
where
    F: Fn(&[f64], &[f64]) -> Result<bool> + Sync,
{
    if n_clones == 0 {
        return invalid("need at least one clone pair");
    }
    let mut idx: Vec<usize> = Vec::with_capacity(times.len());
    for &t in times {
        let s = &cfg.schedule;
        if !(t >= s.t_min() && t <= s.t_max()) {
            return invalid(format!("clone time {t} outside [{}, {}]", s.t_min(), s.t_max()));
        }
        idx.push(s.nearest_index(t));
    }
    idx.sort_unstable();
    let grid = cfg.schedule.points();
    let mut curve = PhiCurve {
        times: Vec::new(),
        values: Vec::new(),
        std_errors: Vec::new(),
        n_clones,
    };
    for &kc in &idx {
        let pj = policy.derive(tag, kc as u64);
        let hits: Vec<bool> = (0..n_clones as u64)
            .into_par_iter()
            .map(|i| {
                let (a, b) = clone_endpoints(cfg, kc, &pj, i)?;
                same(&a, &b)
            })
            .collect::<Result<_>>()?;
        let p = hits.iter().filter(|h| **h).count() as f64 / n_clones as f64;
        curve.times.push(grid[kc]);
        curve.values.push(p);
        curve.std_errors.push(binomial_se(p, n_clones));
    }
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub t: f64,
    /// The curve sits exactly on the level over an interval.
    pub degenerate: bool,
}

/// First time (from small `t`) where the curve meets `level`, by linear
/// interpolation between grid points.
pub fn crossing_time(curve: &PhiCurve, level: f64) -> Result<Crossing> {
    let (t, v) = (&curve.times, &curve.values);
    if t.len() != v.len() || t.is_empty() {
        return invalid("curve needs matching, non-empty times and values");
    }
    for k in 0..v.len() {
        if v[k] == level {
            let flat = (k > 0 && v[k - 1] == level) || (k + 1 < v.len() && v[k + 1] == level);
            return Ok(Crossing {
                t: t[k],
                degenerate: flat,
            });
        }
        if k + 1 < v.len() && (v[k] - level) * (v[k + 1] - level) < 0.0 {
            let s = (level - v[k]) / (v[k + 1] - v[k]);
            return Ok(Crossing {
                t: t[k] + s * (t[k + 1] - t[k]),
                degenerate: false,
            });
        }
    }
    Err(Error::NoCrossing(format!("curve does not span the level {level}")))
}

/// Median over curve pairs of the first time their difference changes sign.
/// Curves must share the same abscissa (typically `t / t_S`).
pub fn pairwise_crossing_median(curves: &[PhiCurve]) -> Result<f64> {
    if curves.len() < 2 {
        return invalid("pairwise crossings need at least two curves");
    }
    let times = &curves[0].times;
    if curves.iter().any(|c| &c.times != times) {
        return invalid("curves must share their time points");
    }
    let mut crossings = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let diff = PhiCurve {
                times: times.clone(),
                values: curves[i]
                    .values
                    .iter()
                    .zip(&curves[j].values)
                    .map(|(a, b)| a - b)
                    .collect(),
                std_errors: vec![0.0; times.len()],
                n_clones: 0,
            };
            if let Ok(c) = crossing_time(&diff, 0.0) {
                crossings.push(c.t);
            }
        }
    }
    if crossings.is_empty() {
        return Err(Error::NoCrossing("no pair of curves crosses".into()));
    }
    crossings.sort_by(f64::total_cmp);
    let m = crossings.len();
    Ok(if m % 2 == 1 {
        crossings[m / 2]
    } else {
        0.5 * (crossings[m / 2 - 1] + crossings[m / 2])
    })
}

/// Largest standardized increase `(φ_j - φ_i)/√(se_i² + se_j²)` over `t_i < t_j`.
pub fn isotonic_violation(curve: &PhiCurve) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..curve.values.len() {
        for j in i + 1..curve.values.len() {
            let rise = curve.values[j] - curve.values[i];
            if rise > 0.0 {
                let se = curve.std_errors[i].hypot(curve.std_errors[j]);
                worst = worst.max(if se > 0.0 { rise / se } else { f64::INFINITY });
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::phi_analytic;
    use crate::mixture::{sample_gaussian_mixture, GmSpec};
    use crate::sde::ScoreSource;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    /// Cyclic Jacobi eigenvalues of a small symmetric matrix.
    fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    #[test]
    fn covariance_examples() {
        let same = Dataset::new(array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]], None).unwrap();
        assert_eq!(covariance(&same).unwrap(), Array2::<f64>::zeros((2, 2)));
        let pm = Dataset::new(array![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]], None).unwrap();
        assert_eq!(
            covariance(&pm).unwrap(),
            array![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        );
        assert!(covariance(&Dataset::new(array![[1.0]], None).unwrap()).is_err());
    }

    #[test]
    fn gm_top_eigenvalue() {
        let spec = GmSpec::new(1.0, 1.0, 16).unwrap();
        let ds = sample_gaussian_mixture(&spec, 100_000, &mut RngPolicy::new(1).stream("gm", 0)).unwrap();
        let r = spectral_report(&ds).unwrap();
        assert!((r.lambda - 17.0).abs() < 0.02 * 17.0, "{}", r.lambda);
        let cos = r.direction.sum() / 4.0;
        assert!(cos > 0.99);
    }

    #[test]
    fn power_iteration_examples() {
        let id = Array2::<f64>::eye(4);
        let e = principal_eigenvalue(&id, POWER_TOL, POWER_MAX_ITERS).unwrap();
        assert_relative_eq!(e.value, 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.vector.dot(&e.vector), 1.0, epsilon = 1e-12);
        let d = array![[3.0, 0.0], [0.0, 1.0]];
        let e = principal_eigenvalue(&d, POWER_TOL, POWER_MAX_ITERS).unwrap();
        assert_relative_eq!(e.value, 3.0, epsilon = 1e-12);
        assert!((e.vector[0].abs() - 1.0).abs() < 1e-9);
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(principal_eigenvalue(&z, POWER_TOL, 10).unwrap().value, 0.0);
        let hard = array![[1.0, 0.0], [0.0, 0.999_999]];
        assert!(matches!(
            principal_eigenvalue(&hard, 1e-14, 3),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let mut r = RngPolicy::new(2).stream("mat", 0);
        for _ in 0..20 {
            let b = Array2::from_shape_fn((8, 8), |_| r.random_range(-1.0..1.0));
            let c = b.t().dot(&b);
            let oracle = jacobi_eigenvalues(c.clone())[0];
            let e = principal_eigenvalue(&c, POWER_TOL, POWER_MAX_ITERS).unwrap();
            assert!((e.value - oracle).abs() < 1e-10 * oracle, "{} vs {oracle}", e.value);
            let res = &c.dot(&e.vector) - &(e.value * &e.vector);
            assert!(res.dot(&res).sqrt() < POWER_TOL * e.value);
        }
    }

    #[test]
    fn table_one_identity() {
        let rows = [(7.66, 1.02), (16.72, 1.41), (3.05, 0.56), (12.11, 1.25), (60.52, 2.05)];
        for (lambda, ts) in rows {
            assert!((speciation_time(lambda).unwrap() - ts).abs() <= 0.01);
        }
        assert_relative_eq!(speciation_time(7.66).unwrap(), 1.018_01, epsilon = 1e-5);
        assert_eq!(speciation_time(1.0).unwrap(), 0.0);
        assert!(matches!(speciation_time(0.5), Err(Error::NoSpeciation { .. })));
    }

    #[test]
    fn noised_covariance_limits() {
        let c0 = array![[2.0, 0.5], [0.5, 1.0]];
        assert_eq!(noised_covariance(&c0, 0.0).unwrap(), c0);
        let inf = noised_covariance(&c0, 40.0).unwrap();
        assert!((inf - Array2::<f64>::eye(2)).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn noised_covariance_matches_forward_samples() {
        let ds = Dataset::new(array![[2.0, 0.0], [-2.0, 1.0], [0.0, -1.0]], None).unwrap();
        let t = 0.4;
        let want = noised_covariance(&covariance(&ds).unwrap(), t).unwrap();
        let mut r = RngPolicy::new(4).stream("fwd", 0);
        let n = 100_000;
        let mut xs = Array2::<f64>::zeros((n, 2));
        for mut row in xs.outer_iter_mut() {
            let mu = r.random_range(0..3);
            let x = crate::sde::forward_sample(ds.row(mu), t, &mut r).unwrap();
            row.assign(&Array1::from(x));
        }
        let got = covariance(&Dataset::new(xs, None).unwrap()).unwrap();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 0.03, "{g} vs {w}");
        }
    }

    #[test]
    fn landau_time_examples() {
        let grid = TimeSchedule::linear(1e-3, 10.0, 500).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        let c = array![[e2, 0.0], [0.0, 0.5]];
        assert_relative_eq!(landau_instability_time(&c, &grid).unwrap(), 1.0, epsilon = 1e-10);
        assert!(matches!(
            landau_instability_time(&Array2::zeros((3, 3)), &grid),
            Err(Error::NoSpeciation { .. })
        ));
        // Rank-one update σ²I + mmᵀ.
        let d = 10;
        let mut c = Array2::<f64>::eye(d);
        c += &Array2::from_elem((d, d), 0.64);
        let t = landau_instability_time(&c, &grid).unwrap();
        assert_relative_eq!(t, 0.5 * (1.0 + d as f64 * 0.64).ln(), epsilon = 1e-10);
        assert_relative_eq!(
            t,
            speciation_time(principal_eigenvalue(&c, POWER_TOL, POWER_MAX_ITERS).unwrap().value).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn crossing_examples() {
        let c = PhiCurve {
            times: vec![1.0, 2.0],
            values: vec![0.9, 0.65],
            std_errors: vec![0.0; 2],
            n_clones: 1,
        };
        assert_relative_eq!(crossing_time(&c, 0.775).unwrap().t, 1.5, epsilon = 1e-12);
        let flat = PhiCurve {
            times: vec![0.5, 1.0, 1.5],
            values: vec![0.775; 3],
            std_errors: vec![0.0; 3],
            n_clones: 1,
        };
        let x = crossing_time(&flat, 0.775).unwrap();
        assert_eq!(
            x,
            Crossing {
                t: 0.5,
                degenerate: true
            }
        );
        let above = PhiCurve {
            times: vec![1.0, 2.0],
            values: vec![0.9, 0.8],
            std_errors: vec![0.0; 2],
            n_clones: 1,
        };
        assert!(crossing_time(&above, 0.775).is_err());
    }

    #[test]
    fn pairwise_median_of_crossing_lines() {
        let times = vec![0.0, 1.0, 2.0];
        let mk = |v: Vec<f64>| PhiCurve {
            times: times.clone(),
            values: v,
            std_errors: vec![0.0; 3],
            n_clones: 1,
        };
        let curves = [
            mk(vec![1.0, 0.8, 0.6]),
            mk(vec![0.9, 0.8, 0.7]),
            mk(vec![0.95, 0.8, 0.65]),
        ];
        // Every pair meets at t = 1.
        assert_relative_eq!(pairwise_crossing_median(&curves).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn classifiers() {
        let p = ProjectionClassifier {
            direction: vec![1.0, 1.0],
        };
        assert_eq!(p.classify(&[0.5, 0.1]).unwrap(), 1);
        assert_eq!(p.classify(&[-0.5, 0.1]).unwrap(), 0);
        assert!(p.classify(&[1.0, -1.0]).is_err());
        // Scaling the direction never changes a label.
        let p3 = ProjectionClassifier {
            direction: vec![3.7, 3.7],
        };
        for x in [[0.2, -0.1], [-2.0, 1.0], [5.0, 5.0]] {
            assert_eq!(p.classify(&x).unwrap(), p3.classify(&x).unwrap());
        }

        let ds = Dataset::new(
            array![[2.0, 0.0], [2.2, 0.1], [-2.0, 0.0], [-1.8, 0.3]],
            Some(vec![1, 1, 0, 0]),
        )
        .unwrap();
        let c = CentroidClassifier::fit(&ds).unwrap();
        assert_eq!(c.classify(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(c.classify(&[-0.5, 3.0]).unwrap(), 0);
        assert!(CentroidClassifier::fit(&ds.clone().with_labels(Some(vec![1; 4])).unwrap()).is_err());
        let unl = ds.with_labels(None).unwrap();
        assert!(default_classifier(&unl).unwrap().classify(&[1.0, 0.0]).is_ok());
    }

    #[test]
    fn phi_endpoints_and_quadrature_agreement() {
        let spec = GmSpec::new(1.0, 1.0, 16).unwrap();
        let sched = TimeSchedule::linear(1e-3, 8.0, 800).unwrap();
        let cfg = BackwardConfig::new(sched, ScoreSource::GmPopulation(spec)).unwrap();
        let cls = ProjectionClassifier {
            direction: spec.m_vec(),
        };
        let ts = 0.5 * 16f64.ln();
        let times = [1e-3, 0.5 * ts, ts, 8.0];
        let n = 600;
        let curve = phi_speciation_mc(&cfg, &cls, &times, n, &RngPolicy::new(12)).unwrap();
        assert_eq!(curve.values[0], 1.0);
        let last = *curve.values.last().unwrap();
        assert!((last - 0.5).abs() < 3.0 * binomial_se(0.5, n));
        for (t, v) in curve.times.iter().zip(&curve.values) {
            let q = phi_analytic(*t, &spec).unwrap();
            assert!(
                (v - q).abs() <= 3.0 * binomial_se(q, n).max(1.0 / n as f64),
                "t={t}: {v} vs {q}"
            );
        }
        assert!(isotonic_violation(&curve) < 3.0);
        let again = phi_speciation_mc(&cfg, &cls, &times, n, &RngPolicy::new(12)).unwrap();
        assert_eq!(curve, again);
    }
}
