//! Resolved experiment settings: defaults, then the config file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dynregimes::time::Spacing;

use crate::UsageError;

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "seed",
    "d",
    "n",
    "n_prime",
    "mu_tilde",
    "sigma",
    "t_min",
    "t_max",
    "grid_points",
    "grid_spacing",
    "clones",
    "dataset",
    "labels",
    "out_dir",
    "eta_steps",
    "phi_level",
    "workers",
];

/// Flags shared by every subcommand; each mirrors a config key.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_prime: Option<usize>,
    #[arg(long)]
    pub mu_tilde: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// `linear` or `geometric`.
    #[arg(long)]
    pub grid_spacing: Option<String>,
    #[arg(long)]
    pub clones: Option<usize>,
    /// Dataset file (DMRL1 binary or CSV).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Label file, one integer per line (255 = unlabeled).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub eta_steps: Option<usize>,
    #[arg(long)]
    pub phi_level: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Scale every dataset column to unit variance after centring.
    #[arg(long)]
    pub rescale: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub d: Option<usize>,
    pub n: usize,
    pub n_prime: usize,
    pub mu_tilde: f64,
    pub sigma: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub grid_points: usize,
    pub grid_spacing: Spacing,
    pub clones: usize,
    pub dataset: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub eta_steps: usize,
    pub phi_level: f64,
    pub workers: usize,
    pub rescale: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 1,
            d: None,
            n: 20_000,
            n_prime: dynregimes::collapse::DEFAULT_N_PRIME,
            mu_tilde: 1.0,
            sigma: 1.0,
            t_min: 1e-3,
            t_max: 10.0,
            grid_points: 200,
            grid_spacing: Spacing::Geometric,
            clones: 1000,
            dataset: None,
            labels: None,
            out_dir: PathBuf::from("."),
            eta_steps: 1000,
            phi_level: dynregimes::speciation::DEFAULT_PHI_LEVEL,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            rescale: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value
        .parse()
        .map_err(|_| UsageError(format!("bad value for {key}: '{value}'")))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key = value", k + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(UsageError(format!("config line {}: unknown key '{key}'", k + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self, UsageError> {
        let mut s = Settings::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
            s.apply(&parse_config(&text)?, path.parent())?;
        }
        s.apply_flags(args)?;
        s.validate()?;
        Ok(s)
    }

    fn apply(&mut self, map: &BTreeMap<String, String>, base: Option<&Path>) -> Result<(), UsageError> {
        let rel = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        for (k, v) in map {
            match k.as_str() {
                "seed" => self.seed = parse(k, v)?,
                "d" => self.d = Some(parse(k, v)?),
                "n" => self.n = parse(k, v)?,
                "n_prime" => self.n_prime = parse(k, v)?,
                "mu_tilde" => self.mu_tilde = parse(k, v)?,
                "sigma" => self.sigma = parse(k, v)?,
                "t_min" => self.t_min = parse(k, v)?,
                "t_max" => self.t_max = parse(k, v)?,
                "grid_points" => self.grid_points = parse(k, v)?,
                "grid_spacing" => self.grid_spacing = v.parse().map_err(|e| UsageError(format!("{e}")))?,
                "clones" => self.clones = parse(k, v)?,
                "dataset" => self.dataset = Some(rel(v)),
                "labels" => self.labels = Some(rel(v)),
                "out_dir" => self.out_dir = rel(v),
                "eta_steps" => self.eta_steps = parse(k, v)?,
                "phi_level" => self.phi_level = parse(k, v)?,
                "workers" => self.workers = parse(k, v)?,
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        Ok(())
    }

    fn apply_flags(&mut self, a: &CommonArgs) -> Result<(), UsageError> {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = a.$f.clone() { self.$f = v; })* };
        }
        take!(
            seed,
            n,
            n_prime,
            mu_tilde,
            sigma,
            t_min,
            t_max,
            grid_points,
            clones,
            eta_steps,
            phi_level,
            workers
        );
        if a.d.is_some() {
            self.d = a.d;
        }
        if let Some(sp) = &a.grid_spacing {
            self.grid_spacing = sp.parse().map_err(|e| UsageError(format!("{e}")))?;
        }
        if a.dataset.is_some() {
            self.dataset = a.dataset.clone();
        }
        if a.labels.is_some() {
            self.labels = a.labels.clone();
        }
        if let Some(o) = &a.out_dir {
            self.out_dir = o.clone();
        }
        self.rescale |= a.rescale;
        Ok(())
    }

    fn validate(&self) -> Result<(), UsageError> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(UsageError(format!(
                "need 0 < t_min < t_max, got {} and {}",
                self.t_min, self.t_max
            )));
        }
        if self.grid_points < 2 || self.eta_steps < 1 {
            return Err(UsageError("grid_points must be >= 2 and eta_steps >= 1".into()));
        }
        if self.workers == 0 {
            return Err(UsageError("workers must be positive".into()));
        }
        if self.d == Some(0) {
            return Err(UsageError("d must be positive".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` lines of every setting that can change results.
    pub fn canonical(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or_else(|| "none".to_string(), |p| p.display().to_string())
        };
        vec![
            ("seed", self.seed.to_string()),
            ("d", self.d.map_or_else(|| "none".to_string(), |d| d.to_string())),
            ("n", self.n.to_string()),
            ("n_prime", self.n_prime.to_string()),
            ("mu_tilde", format!("{:?}", self.mu_tilde)),
            ("sigma", format!("{:?}", self.sigma)),
            ("t_min", format!("{:?}", self.t_min)),
            ("t_max", format!("{:?}", self.t_max)),
            ("grid_points", self.grid_points.to_string()),
            ("grid_spacing", self.grid_spacing.to_string()),
            ("clones", self.clones.to_string()),
            ("dataset", path(&self.dataset)),
            ("labels", path(&self.labels)),
            ("eta_steps", self.eta_steps.to_string()),
            ("phi_level", format!("{:?}", self.phi_level)),
            ("rescale", self.rescale.to_string()),
        ]
    }
}
