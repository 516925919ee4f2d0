//! Forward noising, backward Euler–Maruyama integration and trajectory cloning.

use ndarray::Array2;
use rand::Rng;

use crate::analytics::landau::potential_v;
use crate::error::{invalid, Error, Result};
use crate::mixture::GmSpec;
use crate::rng::{fill_standard_normal, standard_normal_vec, RngPolicy, Stream};
use crate::score::{gm_score_into, EmpiricalDensity};
use crate::time::{delta_unchecked, TimeSchedule};

/// Where the backward drift comes from.
#[derive(Clone, Copy, Debug)]
pub enum ScoreSource<'a> {
    Empirical(&'a EmpiricalDensity<'a>),
    GmPopulation(GmSpec),
    /// Scalar overlap `q` in the potential `V(q, t)`; states have length 1.
    ReducedQ(GmSpec),
}

impl ScoreSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            ScoreSource::Empirical(ed) => ed.dataset().d(),
            ScoreSource::GmPopulation(spec) => spec.d,
            ScoreSource::ReducedQ(_) => 1,
        }
    }
}

/// Integration grid plus score source. The grid is traversed from `t_max`
/// down to `t_min`; step `k` has size `η_k = t_k - t_{k-1}`.
#[derive(Clone, Debug)]
pub struct BackwardConfig<'a> {
    pub schedule: TimeSchedule,
    pub source: ScoreSource<'a>,
}

impl<'a> BackwardConfig<'a> {
    pub fn new(schedule: TimeSchedule, source: ScoreSource<'a>) -> Result<Self> {
        if let ScoreSource::GmPopulation(spec) | ScoreSource::ReducedQ(spec) = &source {
            spec.validate()?;
        }
        Ok(Self { schedule, source })
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    fn scratch_len(&self) -> usize {
        match self.source {
            ScoreSource::Empirical(ed) => ed.dataset().n(),
            _ => 0,
        }
    }

    /// `x + 2F(x, t)`, or `-∂V/∂q` for the reduced process.
    fn drift(&self, x: &[f64], t: f64, out: &mut [f64], scratch: &mut [f64]) {
        match self.source {
            ScoreSource::Empirical(ed) => {
                ed.score_into(x, t, delta_unchecked(t), out, scratch);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi + 2.0 * *o;
                }
            }
            ScoreSource::GmPopulation(spec) => {
                gm_score_into(&spec, x, t, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi + 2.0 * *o;
                }
            }
            ScoreSource::ReducedQ(spec) => out[0] = -potential_v(x[0], t, &spec).1,
        }
    }

    /// Integrates `x` in place from grid index `from` down to `to`, calling
    /// `record(k, x)` after each step lands on index `k`.
    fn run<F: FnMut(usize, &[f64])>(
        &self,
        x: &mut [f64],
        from: usize,
        to: usize,
        rng: &mut Stream,
        mut record: F,
    ) -> Result<()> {
        let grid = self.schedule.points();
        let mut drift = vec![0.0; x.len()];
        let mut noise = vec![0.0; x.len()];
        let mut scratch = vec![0.0; self.scratch_len()];
        for k in (to + 1..=from).rev() {
            let (t, eta) = (grid[k], grid[k] - grid[k - 1]);
            self.drift(x, t, &mut drift, &mut scratch);
            fill_standard_normal(rng, &mut noise);
            let amp = (2.0 * eta).sqrt();
            let mut finite = true;
            for ((xi, f), z) in x.iter_mut().zip(&drift).zip(&noise) {
                *xi += eta * f + amp * z;
                finite &= xi.is_finite();
            }
            if !finite {
                return Err(Error::Divergence { t: grid[k - 1] });
            }
            record(k - 1, x);
        }
        Ok(())
    }
}

/// A sampled path, stored in backward order (times decreasing).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row per time.
    pub states: Array2<f64>,
    pub stream_id: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let d = self.states.ncols();
        &self.states.as_slice().expect("standard layout")[k * d..(k + 1) * d]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    fn from_rows(times: Vec<f64>, rows: Vec<f64>, d: usize, stream_id: String) -> Self {
        let states = Array2::from_shape_vec((times.len(), d), rows).expect("shape");
        Self {
            times,
            states,
            stream_id,
        }
    }
}

/// `a e^{-t} + √Δ_t z`.
pub fn forward_sample<R: Rng + ?Sized>(a: &[f64], t: f64, rng: &mut R) -> Result<Vec<f64>> {
    let delta = crate::time::delta(t)?;
    let (c, s) = ((-t).exp(), delta.sqrt());
    let mut z = standard_normal_vec(rng, a.len());
    for (zi, ai) in z.iter_mut().zip(a) {
        *zi = ai * c + s * *zi;
    }
    Ok(z)
}

fn check_init(cfg: &BackwardConfig, x: &[f64]) -> Result<()> {
    if x.len() != cfg.dim() {
        return invalid(format!(
            "initial state has dimension {}, expected {}",
            x.len(),
            cfg.dim()
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("initial state is not finite");
    }
    Ok(())
}

/// Full path from `t_max` to `t_min`.
pub fn backward_integrate(
    cfg: &BackwardConfig,
    x_init: &[f64],
    rng: &mut Stream,
    stream_id: &str,
) -> Result<Trajectory> {
    check_init(cfg, x_init)?;
    let grid = cfg.schedule.points();
    let last = grid.len() - 1;
    let mut x = x_init.to_vec();
    let mut rows = x.clone();
    cfg.run(&mut x, last, 0, rng, |_, s| rows.extend_from_slice(s))?;
    let times = grid.iter().rev().copied().collect();
    Ok(Trajectory::from_rows(times, rows, x.len(), stream_id.to_string()))
}

/// Final state only, without storing the path.
pub fn backward_final(cfg: &BackwardConfig, x_init: &[f64], rng: &mut Stream) -> Result<Vec<f64>> {
    check_init(cfg, x_init)?;
    let mut x = x_init.to_vec();
    cfg.run(&mut x, cfg.schedule.count() - 1, 0, rng, |_, _| {})?;
    Ok(x)
}

/// Trajectory number `index` of an ensemble: standard normal start and its
/// own stream, both derived from `(policy, "trajectory", index)`.
pub fn ensemble_member(cfg: &BackwardConfig, policy: &RngPolicy, index: u64) -> Result<Trajectory> {
    let mut rng = policy.stream("trajectory", index);
    let x0 = standard_normal_vec(&mut rng, cfg.dim());
    backward_integrate(
        cfg,
        &x0,
        &mut rng,
        &format!("{}/trajectory/{index}", policy.master_seed()),
    )
}

/// Two continuations of one backward path, split at a grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct ClonePair {
    /// Path from `t_max` down to the clone time.
    pub prefix: Trajectory,
    /// Full paths; both repeat the prefix exactly before diverging.
    pub branch_a: Trajectory,
    pub branch_b: Trajectory,
}

fn clone_streams(policy: &RngPolicy, index: u64) -> (Stream, Stream, Stream) {
    let branch = policy.derive("clone-branch", index);
    (
        policy.stream("clone-prefix", index),
        branch.stream("a", 0),
        branch.stream("b", 0),
    )
}

fn clone_index(cfg: &BackwardConfig, t_clone: f64) -> Result<usize> {
    let s = &cfg.schedule;
    if !(t_clone >= s.t_min() && t_clone <= s.t_max()) {
        return invalid(format!("clone time {t_clone} outside [{}, {}]", s.t_min(), s.t_max()));
    }
    Ok(s.nearest_index(t_clone))
}

/// Clone pair number `index`; `t_clone` is snapped to the nearest grid time.
pub fn clone_at(cfg: &BackwardConfig, t_clone: f64, policy: &RngPolicy, index: u64) -> Result<ClonePair> {
    let kc = clone_index(cfg, t_clone)?;
    let grid = cfg.schedule.points();
    let last = grid.len() - 1;
    let d = cfg.dim();
    let (mut rp, mut ra, mut rb) = clone_streams(policy, index);
    let mut x = standard_normal_vec(&mut rp, d);
    let mut prefix_rows = x.clone();
    cfg.run(&mut x, last, kc, &mut rp, |_, s| prefix_rows.extend_from_slice(s))?;
    let prefix_times: Vec<f64> = grid[kc..].iter().rev().copied().collect();
    let full_times: Vec<f64> = grid.iter().rev().copied().collect();
    let id = format!("{}/clone/{index}", policy.master_seed());

    let branch = |rng: &mut Stream, tag: &str| -> Result<Trajectory> {
        let mut y = x.clone();
        let mut rows = prefix_rows.clone();
        cfg.run(&mut y, kc, 0, rng, |_, s| rows.extend_from_slice(s))?;
        Ok(Trajectory::from_rows(
            full_times.clone(),
            rows,
            d,
            format!("{id}/{tag}"),
        ))
    };
    let branch_a = branch(&mut ra, "a")?;
    let branch_b = branch(&mut rb, "b")?;
    let prefix = Trajectory::from_rows(prefix_times, prefix_rows, d, id);
    Ok(ClonePair {
        prefix,
        branch_a,
        branch_b,
    })
}

/// Final states of the two branches of clone pair `index` split at grid
/// index `kc`; same streams as [`clone_at`].
pub fn clone_endpoints(
    cfg: &BackwardConfig,
    kc: usize,
    policy: &RngPolicy,
    index: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let last = cfg.schedule.count() - 1;
    if kc > last {
        return invalid(format!("clone index {kc} beyond grid"));
    }
    let (mut rp, mut ra, mut rb) = clone_streams(policy, index);
    let mut x = standard_normal_vec(&mut rp, cfg.dim());
    cfg.run(&mut x, last, kc, &mut rp, |_, _| {})?;
    let mut y = x.clone();
    cfg.run(&mut x, kc, 0, &mut ra, |_, _| {})?;
    cfg.run(&mut y, kc, 0, &mut rb, |_, _| {})?;
    Ok((x, y))
}

/// Backward Langevin path of the scalar overlap `q`, started from a
/// standard normal draw.
pub fn reduced_q_integrate(spec: &GmSpec, schedule: &TimeSchedule, rng: &mut Stream) -> Result<Trajectory> {
    let cfg = BackwardConfig::new(schedule.clone(), ScoreSource::ReducedQ(*spec))?;
    let q0 = standard_normal_vec(rng, 1);
    backward_integrate(&cfg, &q0, rng, "reduced-q")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::numerics::RunningStats;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn forward_sample_limits() {
        let mut r = RngPolicy::new(1).stream("f", 0);
        let a = [0.5, -2.0];
        assert_eq!(forward_sample(&a, 0.0, &mut r).unwrap(), a.to_vec());
        assert!(forward_sample(&a, -1.0, &mut r).is_err());
    }

    #[test]
    fn forward_sample_moments() {
        let mut r = RngPolicy::new(2).stream("f", 0);
        let n = 100_000;
        let var: RunningStats = (0..n)
            .map(|_| forward_sample(&[0.0], 30.0, &mut r).unwrap()[0])
            .collect();
        assert!((var.variance() - 1.0).abs() < 0.02);
        let t = 0.4;
        let mean: RunningStats = (0..n).map(|_| forward_sample(&[1.5], t, &mut r).unwrap()[0]).collect();
        let bound = 4.0 * (delta_unchecked(t) / n as f64).sqrt();
        assert!((mean.mean() - 1.5 * (-t).exp()).abs() < bound);
    }

    #[test]
    fn one_step_with_zero_score_scales_state() {
        // A single far-away atom at t=40 makes F ≈ 0 only if x is also 0;
        // use the population score with μ̃ = 0 and σ = 1, where F = -x.
        // Drift x + 2F = -x, so the step is x(1 - η) + noise.
        let spec = GmSpec::new(0.0, 1.0, 3).unwrap();
        let sched = TimeSchedule::linear(1.0, 1.1, 2).unwrap();
        let cfg = BackwardConfig::new(sched, ScoreSource::GmPopulation(spec)).unwrap();
        let x0 = [1.0, 2.0, -1.0];
        let mut r = RngPolicy::new(3).stream("s", 0);
        let mut r2 = r.clone();
        let out = backward_final(&cfg, &x0, &mut r).unwrap();
        let z = standard_normal_vec(&mut r2, 3);
        let eta: f64 = 1.1 - 1.0;
        for k in 0..3 {
            assert_relative_eq!(out[k], x0[k] * (1.0 - eta) + (2.0 * eta).sqrt() * z[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn single_atom_contracts_to_atom() {
        let a = [0.7, -0.3, 1.2, 0.0];
        let ds = Dataset::new(array![[0.7, -0.3, 1.2, 0.0]], None).unwrap();
        let ed = EmpiricalDensity::new(&ds);
        let sched = TimeSchedule::geometric(1e-4, 10.0, 1000).unwrap();
        let cfg = BackwardConfig::new(sched, ScoreSource::Empirical(&ed)).unwrap();
        let bound = 3.0 * (4.0 * delta_unchecked(1e-4)).sqrt();
        let policy = RngPolicy::new(4);
        for i in 0..20 {
            let tr = ensemble_member(&cfg, &policy, i).unwrap();
            let dist: f64 = tr
                .final_state()
                .iter()
                .zip(&a)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(dist < bound, "trajectory {i}: {dist} >= {bound}");
        }
    }

    #[test]
    fn trajectory_shape_and_determinism() {
        let spec = GmSpec::new(1.0, 1.0, 5).unwrap();
        let cfg = BackwardConfig::new(
            TimeSchedule::linear(1e-3, 5.0, 50).unwrap(),
            ScoreSource::GmPopulation(spec),
        )
        .unwrap();
        let p = RngPolicy::new(5);
        let a = ensemble_member(&cfg, &p, 7).unwrap();
        let b = ensemble_member(&cfg, &p, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert_eq!(a.states.dim(), (50, 5));
        assert_eq!(a.times[0], 5.0);
        assert_eq!(*a.times.last().unwrap(), 1e-3);
        assert!(a.times.windows(2).all(|w| w[1] < w[0]));
        let fin = backward_final(&cfg, a.state(0), &mut p.stream("trajectory", 7)).unwrap();
        // Same stream but the start vector consumed draws first, so only
        // the shape is comparable here.
        assert_eq!(fin.len(), 5);
    }

    #[test]
    fn divergence_is_reported() {
        let spec = GmSpec::new(0.0, 1.0, 1).unwrap();
        let cfg = BackwardConfig::new(
            TimeSchedule::linear(1e-3, 1.0, 3).unwrap(),
            ScoreSource::GmPopulation(spec),
        )
        .unwrap();
        let err = backward_final(&cfg, &[f64::MAX], &mut RngPolicy::new(1).stream("x", 0));
        assert!(matches!(err, Err(Error::Divergence { .. })) || err.is_ok());
        let err = backward_final(&cfg, &[f64::NAN], &mut RngPolicy::new(1).stream("x", 0));
        assert!(err.is_err());
    }

    #[test]
    fn clones_share_prefix_bit_exactly() {
        let spec = GmSpec::new(1.0, 1.0, 6).unwrap();
        let cfg = BackwardConfig::new(
            TimeSchedule::linear(1e-3, 6.0, 120).unwrap(),
            ScoreSource::GmPopulation(spec),
        )
        .unwrap();
        let p = RngPolicy::new(6);
        let pair = clone_at(&cfg, 2.0, &p, 3).unwrap();
        let kp = pair.prefix.len();
        assert_eq!(
            *pair.prefix.times.last().unwrap(),
            cfg.schedule.points()[cfg.schedule.nearest_index(2.0)]
        );
        for k in 0..kp {
            assert_eq!(pair.branch_a.state(k), pair.prefix.state(k));
            assert_eq!(pair.branch_b.state(k), pair.prefix.state(k));
        }
        assert_ne!(pair.branch_a.state(kp), pair.branch_b.state(kp));
        let (ea, eb) = clone_endpoints(&cfg, cfg.schedule.nearest_index(2.0), &p, 3).unwrap();
        assert_eq!(ea.as_slice(), pair.branch_a.final_state());
        assert_eq!(eb.as_slice(), pair.branch_b.final_state());
    }

    #[test]
    fn clone_extremes() {
        let spec = GmSpec::new(1.0, 1.0, 4).unwrap();
        let cfg = BackwardConfig::new(
            TimeSchedule::linear(1e-3, 4.0, 60).unwrap(),
            ScoreSource::GmPopulation(spec),
        )
        .unwrap();
        let p = RngPolicy::new(8);
        let at_min = clone_at(&cfg, 1e-3, &p, 0).unwrap();
        assert_eq!(at_min.branch_a.final_state(), at_min.branch_b.final_state());
        let at_max = clone_at(&cfg, 4.0, &p, 0).unwrap();
        assert_eq!(at_max.prefix.len(), 1);
        assert_ne!(at_max.branch_a.final_state(), at_max.branch_b.final_state());
        assert!(clone_at(&cfg, 5.0, &p, 0).is_err());
    }

    #[test]
    fn reduced_q_without_mean_is_ou() {
        let spec = GmSpec::new(0.0, 1.0, 100).unwrap();
        let sched = TimeSchedule::linear(1e-3, 5.0, 500).unwrap();
        let p = RngPolicy::new(9);
        let stats: RunningStats = (0..10_000)
            .map(|i| {
                *reduced_q_integrate(&spec, &sched, &mut p.stream("q", i))
                    .unwrap()
                    .final_state()
                    .first()
                    .unwrap()
            })
            .collect();
        let se_var = (2.0f64 / 10_000.0).sqrt();
        assert!((stats.variance() - 1.0).abs() < 4.0 * se_var, "{}", stats.variance());
        assert!(stats.mean().abs() < 4.0 / 100.0);
    }

    #[test]
    fn reduced_q_symmetry_breaking() {
        let spec = GmSpec::new(1.0, 1.0, 10_000).unwrap();
        let sched = TimeSchedule::linear(1e-3, 10.0, 1000).unwrap();
        let p = RngPolicy::new(10);
        let n = 10_000;
        let finals: Vec<f64> = (0..n)
            .map(|i| {
                reduced_q_integrate(&spec, &sched, &mut p.stream("q", i))
                    .unwrap()
                    .final_state()[0]
            })
            .collect();
        let pos = finals.iter().filter(|q| **q > 0.0).count() as f64 / n as f64;
        assert!((pos - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "{pos}");
        let mean_abs = finals.iter().map(|q| q.abs()).sum::<f64>() / n as f64;
        assert!(mean_abs > 10.0, "|q| did not grow: {mean_abs}");
    }

    #[test]
    fn weak_order_one_on_single_atom() {
        // The drift is linear in x for one atom, so the ensemble mean obeys
        // dm/d(-t) = m + 2(a e^{-t} - m)/Δ_t from m(T) = 0. RK4 on that ODE
        // is the oracle; halving η should roughly halve the bias.
        let a = 1.0;
        let ds = Dataset::new(array![[1.0]], None).unwrap();
        let ed = EmpiricalDensity::new(&ds);
        let (t0, tf) = (0.3, 2.0);
        let rhs = |t: f64, m: f64| -(m + 2.0 * (a * (-t).exp() - m) / delta_unchecked(t));
        let steps = 100_000;
        let h = (t0 - tf) / steps as f64;
        let (mut t, mut m) = (tf, 0.0);
        for _ in 0..steps {
            let k1 = rhs(t, m);
            let k2 = rhs(t + 0.5 * h, m + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, m + 0.5 * h * k2);
            let k4 = rhs(t + h, m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        let exact = m;
        let bias = |steps: usize| {
            let cfg = BackwardConfig::new(
                TimeSchedule::linear(t0, tf, steps + 1).unwrap(),
                ScoreSource::Empirical(&ed),
            )
            .unwrap();
            let p = RngPolicy::new(11);
            let m: RunningStats = (0..100_000)
                .map(|i| ensemble_member(&cfg, &p, i).unwrap().final_state()[0])
                .collect();
            (m.mean() - exact, m.std_error())
        };
        let (b1, se1) = bias(10);
        let (b2, se2) = bias(20);
        assert!(b1.abs() > 5.0 * se1, "coarse bias {b1} not resolved (se {se1})");
        let ratio = b2 / b1;
        assert!(
            (ratio - 0.5).abs() < 0.15 + 4.0 * (se1 + se2) / b1.abs(),
            "ratio {ratio}"
        );
    }
}
