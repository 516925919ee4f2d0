//! One function per subcommand. Each writes its CSVs into `out_dir` and
//! returns the manifest, already written to `manifest.txt`.

use anyhow::{Context, Result};
use rayon::prelude::*;

use dynregimes::analytics::{landau_tstar, phi_analytic, rem_evaluate, tc_closed_form};
use dynregimes::collapse::{
    collapse_time_from_curve, excess_entropy_curve, phi_collapse_mc, t_hat_histogram, EntropyCurve,
};
use dynregimes::nearest::track_nearest;
use dynregimes::sde::ensemble_member;
use dynregimes::speciation::{
    crossing_time, default_classifier, phi_speciation_mc, spectral_report, Classifier, ProjectionClassifier,
    SpectralReport,
};
use dynregimes::{
    alpha_param, sample_gaussian_mixture, BackwardConfig, Dataset, EmpiricalDensity, GmSpec, RngPolicy, ScoreSource,
    TimeSchedule,
};

use crate::config::Settings;
use crate::output::{fmt_f64, Manifest, Table};
use crate::UsageError;

/// Everything a command needs besides its own logic.
pub struct Run {
    pub settings: Settings,
    pub policy: RngPolicy,
    pub manifest: Manifest,
}

impl Run {
    pub fn new(command: &str, settings: Settings) -> Result<Self> {
        std::fs::create_dir_all(&settings.out_dir)
            .with_context(|| format!("creating output directory {}", settings.out_dir.display()))?;
        let policy = RngPolicy::new(settings.seed);
        let manifest = Manifest::new(command, &settings);
        Ok(Self {
            settings,
            policy,
            manifest,
        })
    }

    fn table(&self, columns: &[&str]) -> Table {
        Table::new(self.manifest.hash(), columns)
    }

    fn write(&self, table: &Table, name: &str) -> Result<()> {
        table.write(&self.settings.out_dir, name).map(|_| ())
    }

    /// Backward integration grid: `eta_steps` steps on `[t_min, t_max]`.
    fn integration_schedule(&self) -> Result<TimeSchedule> {
        let s = &self.settings;
        Ok(TimeSchedule::new(s.t_min, s.t_max, s.eta_steps + 1, s.grid_spacing)?)
    }

    /// Measurement times: `grid_points` points on `[t_min, t_max]`.
    fn sample_schedule(&self) -> Result<TimeSchedule> {
        let s = &self.settings;
        Ok(TimeSchedule::new(s.t_min, s.t_max, s.grid_points, s.grid_spacing)?)
    }

    fn gm_spec(&self) -> Result<GmSpec> {
        let s = &self.settings;
        let d =
            s.d.ok_or_else(|| UsageError("either dataset or d (mixture dimension) is required".into()))?;
        GmSpec::new(s.mu_tilde, s.sigma, d).map_err(|e| UsageError(e.to_string()).into())
    }

    /// The user's dataset (centred, optionally rescaled), or `None` in mixture mode.
    fn user_dataset(&self) -> Result<Option<Dataset>> {
        let s = &self.settings;
        let Some(path) = &s.dataset else { return Ok(None) };
        if !path.is_file() {
            return Err(UsageError(format!("dataset not found: {}", path.display())).into());
        }
        let mut ds = Dataset::load(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        if let Some(lp) = &s.labels {
            let text = std::fs::read_to_string(lp)
                .map_err(|e| UsageError(format!("cannot read labels {}: {e}", lp.display())))?;
            let labels = text
                .split_whitespace()
                .map(|v| v.parse::<u8>().map_err(|_| UsageError(format!("bad label '{v}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            ds = ds.with_labels(Some(labels)).map_err(|e| UsageError(e.to_string()))?;
        }
        let (mut ds, _) = ds.center();
        if s.rescale {
            ds = ds.rescale().0;
        }
        Ok(Some(ds))
    }

    /// User dataset, or `n` fresh mixture samples.
    fn dataset_or_sample(&mut self) -> Result<(Dataset, Option<GmSpec>)> {
        if let Some(ds) = self.user_dataset()? {
            return Ok((ds, None));
        }
        let spec = self.gm_spec()?;
        let ds = sample_gaussian_mixture(&spec, self.settings.n, &mut self.policy.stream("dataset", 0))?;
        Ok((ds, Some(spec)))
    }

    fn finish(self) -> Result<Manifest> {
        self.manifest.write(&self.settings.out_dir)?;
        Ok(self.manifest)
    }
}

fn spectral_table(run: &Run, r: &SpectralReport) -> Table {
    let mut t = run.table(&["lambda", "t_s", "residual", "iters"]);
    t.row(&[
        fmt_f64(r.lambda),
        fmt_f64(r.t_s.unwrap_or(f64::NAN)),
        fmt_f64(r.residual),
        r.iters.to_string(),
    ]);
    t
}

pub fn speciation(settings: Settings) -> Result<Manifest> {
    let mut run = Run::new("speciation", settings)?;
    let (ds, spec) = run.dataset_or_sample()?;
    let report = spectral_report(&ds)?;
    run.write(&spectral_table(&run, &report), "spectral.csv")?;
    run.manifest.result("lambda", fmt_f64(report.lambda));
    run.manifest
        .result("t_s", report.t_s.map_or("none".to_string(), fmt_f64));

    let sched = run.integration_schedule()?;
    let times = run.sample_schedule()?.points().to_vec();
    let policy = run.policy.derive("speciation", 0);
    let clones = run.settings.clones;
    let curve = match spec {
        Some(spec) => {
            run.manifest.result(
                "t_s_theory",
                fmt_f64(0.5 * (spec.sigma * spec.sigma + spec.d as f64 * spec.mu_tilde.powi(2)).ln()),
            );
            let cfg = BackwardConfig::new(sched, ScoreSource::GmPopulation(spec))?;
            let cls = ProjectionClassifier {
                direction: spec.m_vec(),
            };
            phi_speciation_mc(&cfg, &cls, &times, clones, &policy)?
        }
        None => {
            let ed = EmpiricalDensity::new(&ds);
            let cfg = BackwardConfig::new(sched, ScoreSource::Empirical(&ed))?;
            let cls: Box<dyn Classifier> = default_classifier(&ds)?;
            phi_speciation_mc(&cfg, cls.as_ref(), &times, clones, &policy)?
        }
    };
    let ts = report.t_s.unwrap_or(f64::NAN);
    let mut t = run.table(&["t", "t_over_ts", "phi", "stderr", "n_clones"]);
    for k in 0..curve.times.len() {
        t.row(&[
            fmt_f64(curve.times[k]),
            fmt_f64(curve.times[k] / ts),
            fmt_f64(curve.values[k]),
            fmt_f64(curve.std_errors[k]),
            curve.n_clones.to_string(),
        ]);
    }
    run.write(&t, "speciation.csv")?;
    match crossing_time(&curve, run.settings.phi_level) {
        Ok(c) => {
            run.manifest.result("phi_crossing", fmt_f64(c.t));
            run.manifest
                .result("phi_crossing_status", if c.degenerate { "degenerate" } else { "ok" });
        }
        Err(e) => run.manifest.result("phi_crossing_status", e.to_string()),
    }
    run.finish()
}

fn entropy_table(run: &Run, curve: &EntropyCurve) -> Table {
    let mut t = run.table(&["t", "s_emp", "s_emp_se", "s_sep", "f_excess", "f_over_alpha"]);
    for k in 0..curve.times.len() {
        let ratio = if curve.alpha > 0.0 {
            curve.f_excess[k] / curve.alpha
        } else {
            f64::NAN
        };
        t.row(&[
            fmt_f64(curve.times[k]),
            fmt_f64(curve.s_emp[k]),
            fmt_f64(curve.s_emp_se[k]),
            fmt_f64(curve.s_sep[k]),
            fmt_f64(curve.f_excess[k]),
            fmt_f64(ratio),
        ]);
    }
    t
}

/// Entropy curve plus its crossing, recorded in the manifest.
fn entropy_stage(run: &mut Run, ds: &Dataset, spec: Option<GmSpec>, file: &str) -> Result<()> {
    let times = run.sample_schedule()?.points().to_vec();
    let ed = EmpiricalDensity::new(ds);
    let curve = excess_entropy_curve(&ed, &times, run.settings.n_prime, &run.policy.derive("entropy", 0))?;
    run.write(&entropy_table(run, &curve), file)?;
    run.manifest.result("alpha", fmt_f64(curve.alpha));
    run.manifest.result("crossing_floor", fmt_f64(curve.floor));
    run.manifest.result(
        "crossing_rule",
        "last exit of f_excess from floor + 2*SE, interpolated to floor",
    );
    if ds.n() == 1 {
        run.manifest.result("t_c", fmt_f64(run.settings.t_min));
        run.manifest
            .result("t_c_status", "degenerate: single atom, collapsed at every time");
    } else {
        match collapse_time_from_curve(&curve) {
            Ok(tc) => {
                run.manifest.result("t_c", fmt_f64(tc));
                run.manifest.result("t_c_status", "ok");
            }
            Err(e) => run.manifest.result("t_c_status", e.to_string()),
        }
    }
    if let Some(spec) = spec {
        if ds.n() >= 2 {
            run.manifest
                .result("t_c_theory", fmt_f64(tc_closed_form(ds.n(), spec.d, spec.sigma)?));
        }
    }
    Ok(())
}

pub fn collapse(settings: Settings) -> Result<Manifest> {
    let mut run = Run::new("collapse", settings)?;
    let clones = run.settings.clones;
    if clones < dynregimes::collapse::MIN_TRACES {
        return Err(UsageError(format!("collapse needs clones >= {}", dynregimes::collapse::MIN_TRACES)).into());
    }
    let (ds, spec) = run.dataset_or_sample()?;
    entropy_stage(&mut run, &ds, spec, "collapse.csv")?;

    let times = run.sample_schedule()?.points().to_vec();
    let ed = EmpiricalDensity::new(&ds);
    let cfg = BackwardConfig::new(run.integration_schedule()?, ScoreSource::Empirical(&ed))?;
    let phi_c = phi_collapse_mc(&cfg, &ds, &times, clones, &run.policy.derive("phi-c", 0))?;
    let mut t = run.table(&["t", "phi_c", "stderr"]);
    for k in 0..phi_c.times.len() {
        t.row(&[
            fmt_f64(phi_c.times[k]),
            fmt_f64(phi_c.values[k]),
            fmt_f64(phi_c.std_errors[k]),
        ]);
    }
    run.write(&t, "phic.csv")?;

    let tp = run.policy.derive("that", 0);
    let traces = (0..clones as u64)
        .into_par_iter()
        .map(|i| Ok(track_nearest(&ensemble_member(&cfg, &tp, i)?, &ds)?))
        .collect::<Result<Vec<_>>>()?;
    let hist = t_hat_histogram(&traces)?;
    let mut t = run.table(&["t_hat", "count"]);
    for (time, count) in &hist.bins {
        t.row(&[fmt_f64(*time), count.to_string()]);
    }
    run.write(&t, "that.csv")?;
    run.manifest.result("mean_t_hat", fmt_f64(hist.mean));
    run.manifest.result("t_hat_se", fmt_f64(hist.std_error));
    run.finish()
}

pub fn entropy(settings: Settings) -> Result<Manifest> {
    let mut run = Run::new("entropy", settings)?;
    let (ds, spec) = run.dataset_or_sample()?;
    entropy_stage(&mut run, &ds, spec, "entropy.csv")?;
    run.finish()
}

pub fn rem(settings: Settings) -> Result<Manifest> {
    let mut run = Run::new("rem", settings)?;
    let spec = run.gm_spec()?;
    let n = run.settings.n;
    if n < 2 {
        return Err(UsageError("rem needs n >= 2".into()).into());
    }
    let alpha = alpha_param(n, spec.d);
    let mut t = run.table(&["t", "psi_plus", "psi_minus", "branch", "t_cond"]);
    let mut t_cond = f64::NAN;
    for &time in run.sample_schedule()?.points() {
        let ev = rem_evaluate(time, alpha, &spec)?;
        t_cond = ev.t_cond;
        t.row(&[
            fmt_f64(time),
            fmt_f64(ev.psi_plus),
            fmt_f64(ev.psi_minus),
            ev.branch.to_string(),
            fmt_f64(ev.t_cond),
        ]);
    }
    run.write(&t, "rem.csv")?;
    run.manifest.result("alpha", fmt_f64(alpha));
    run.manifest.result("t_cond", fmt_f64(t_cond));
    run.finish()
}

pub fn gm(settings: Settings) -> Result<Manifest> {
    let mut run = Run::new("gm", settings)?;
    let spec = run.gm_spec()?;
    let mut t = run.table(&["t", "phi_quadrature"]);
    for &time in run.sample_schedule()?.points() {
        t.row(&[fmt_f64(time), fmt_f64(phi_analytic(time, &spec)?)]);
    }
    run.write(&t, "gm_phi.csv")?;
    let d = spec.d as f64;
    let m2 = spec.mu_tilde * spec.mu_tilde;
    run.manifest
        .result("t_s_spectral", fmt_f64(0.5 * (spec.sigma * spec.sigma + d * m2).ln()));
    if d * m2 > 1.0 {
        run.manifest.result("t_s_leading", fmt_f64(0.5 * (d * m2).ln()));
    }
    if let Ok(ts) = landau_tstar(spec.d, spec.mu_tilde) {
        run.manifest.result("landau_tstar", fmt_f64(ts));
    }
    if run.settings.n >= 2 {
        run.manifest
            .result("t_c", fmt_f64(tc_closed_form(run.settings.n, spec.d, spec.sigma)?));
    }
    run.finish()
}

pub fn simulate(settings: Settings, reduced: bool) -> Result<Manifest> {
    let mut run = Run::new(if reduced { "simulate-reduced" } else { "simulate" }, settings)?;
    let sched = run.integration_schedule()?;
    let policy = run.policy.derive("simulate", 0);
    let data = if reduced { None } else { run.user_dataset()? };
    let traj = match &data {
        Some(ds) => {
            let ed = EmpiricalDensity::new(ds);
            let cfg = BackwardConfig::new(sched, ScoreSource::Empirical(&ed))?;
            ensemble_member(&cfg, &policy, 0)?
        }
        None => {
            let spec = run.gm_spec()?;
            let source = if reduced {
                ScoreSource::ReducedQ(spec)
            } else {
                ScoreSource::GmPopulation(spec)
            };
            ensemble_member(&BackwardConfig::new(sched, source)?, &policy, 0)?
        }
    };
    let mut cols = vec!["t".to_string()];
    if reduced {
        cols.push("q".into());
    } else {
        cols.extend((0..traj.states.ncols()).map(|i| format!("x_{i}")));
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = run.table(&col_refs);
    for k in 0..traj.len() {
        let mut row = vec![fmt_f64(traj.times[k])];
        row.extend(traj.state(k).iter().map(|v| fmt_f64(*v)));
        t.row(&row);
    }
    run.write(&t, "trajectory.csv")?;
    if let Some(ds) = &data {
        let nn = track_nearest(&traj, ds)?;
        let mut t = run.table(&["t", "mu_star", "distance"]);
        for k in 0..nn.times.len() {
            t.row(&[
                fmt_f64(nn.times[k]),
                nn.mu_star[k].to_string(),
                fmt_f64(nn.distances[k]),
            ]);
        }
        run.write(&t, "nearest.csv")?;
        run.manifest.result("t_hat_c", fmt_f64(nn.t_hat_c));
        run.manifest.result("final_distance", fmt_f64(nn.final_distance));
    }
    run.finish()
}
