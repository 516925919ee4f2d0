//! OU time conventions, integration grids and the DDPM step map.

use crate::error::{invalid, Result};

/// Accumulated forward noise variance `1 - exp(-2t)`.
pub fn delta(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid(format!("time must be non-negative, got {t}"));
    }
    Ok(delta_unchecked(t))
}

/// `delta` without the sign check, for inner loops whose times come from a
/// validated grid.
#[inline]
pub fn delta_unchecked(t: f64) -> f64 {
    -(-2.0 * t).exp_m1()
}

/// `ln(n) / d`.
pub fn alpha_param(n: usize, d: usize) -> f64 {
    (n as f64).ln() / d as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Geometric,
}

impl std::str::FromStr for Spacing {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "geometric" => Ok(Spacing::Geometric),
            other => invalid(format!("unknown grid spacing '{other}'")),
        }
    }
}

impl std::fmt::Display for Spacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Spacing::Linear => "linear",
            Spacing::Geometric => "geometric",
        })
    }
}

/// Increasing grid of OU times on `[t_min, t_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSchedule {
    t_min: f64,
    t_max: f64,
    count: usize,
    spacing: Spacing,
    points: Vec<f64>,
}

impl TimeSchedule {
    pub fn new(t_min: f64, t_max: f64, count: usize, spacing: Spacing) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return invalid(format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]"));
        }
        if count < 2 {
            return invalid("a schedule needs at least two points");
        }
        let last = (count - 1) as f64;
        let mut points: Vec<f64> = (0..count)
            .map(|k| {
                let s = k as f64 / last;
                match spacing {
                    Spacing::Linear => t_min + (t_max - t_min) * s,
                    Spacing::Geometric => t_min * (t_max / t_min).powf(s),
                }
            })
            .collect();
        points[0] = t_min;
        points[count - 1] = t_max;
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("grid is not strictly increasing (too many points for the range)");
        }
        Ok(Self {
            t_min,
            t_max,
            count,
            spacing,
            points,
        })
    }

    pub fn linear(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        Self::new(t_min, t_max, count, Spacing::Linear)
    }

    pub fn geometric(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        Self::new(t_min, t_max, count, Spacing::Geometric)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// Grid points in increasing order.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let p = &self.points;
        match p.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == p.len() => p.len() - 1,
            Err(i) => {
                if t - p[i - 1] <= p[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

impl Default for TimeSchedule {
    /// Geometric, 200 points on `[1e-3, 10]`.
    fn default() -> Self {
        Self::geometric(1e-3, 10.0, 200).expect("default grid is valid")
    }
}

/// Discrete DDPM variance schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSchedule {
    betas: Vec<f64>,
    alphabar: Vec<f64>,
}

impl DiscreteSchedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return invalid("empty beta schedule");
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return invalid(format!("beta {b} outside (0, 1)"));
        }
        let alphabar = betas
            .iter()
            .scan(1.0, |acc, b| {
                *acc *= 1.0 - b;
                Some(*acc)
            })
            .collect();
        Ok(Self { betas, alphabar })
    }

    /// Betas interpolated linearly from `beta_1` to `beta_l` over `l` steps.
    pub fn linear(beta_1: f64, beta_l: f64, l: usize) -> Result<Self> {
        if l < 2 {
            return invalid("linear schedule needs at least two steps");
        }
        let betas = (0..l)
            .map(|k| beta_1 + (beta_l - beta_1) * k as f64 / (l - 1) as f64)
            .collect();
        Self::new(betas)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `alphabar[k]` is the product over the first `k + 1` steps.
    pub fn alphabar(&self) -> &[f64] {
        &self.alphabar
    }

    /// OU time reached after `step` DDPM steps; `step = 0` maps to 0.
    pub fn ddpm_time_map(&self, step: usize) -> Result<f64> {
        if step > self.len() {
            return invalid(format!("step {step} beyond schedule length {}", self.len()));
        }
        if step == 0 {
            return Ok(0.0);
        }
        Ok(-0.5 * self.alphabar[step - 1].ln())
    }
}

/// OU time corresponding to a cumulative signal level `alphabar`.
pub fn ou_time_from_alphabar(alphabar: f64) -> Result<f64> {
    if !(alphabar > 0.0 && alphabar <= 1.0) {
        return invalid(format!("alphabar {alphabar} outside (0, 1]"));
    }
    Ok(-0.5 * alphabar.ln())
}
