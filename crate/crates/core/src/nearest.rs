//! Nearest training atom along a backward path.

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::sde::Trajectory;

/// Index and Euclidean distance of the closest row; ties go to the lowest index.
pub fn nearest_atom(x: &[f64], data: &Dataset) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for mu in 0..data.n() {
        let d2: f64 = x.iter().zip(data.row(mu)).map(|(a, b)| (a - b).powi(2)).sum();
        if d2 < best.1 {
            best = (mu, d2);
        }
    }
    (best.0, best.1.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NearestNeighborTrace {
    /// Backward order, matching the trajectory.
    pub times: Vec<f64>,
    /// 0-based row indices.
    pub mu_star: Vec<usize>,
    pub distances: Vec<f64>,
    /// Largest grid time from which the nearest index no longer changes.
    pub t_hat_c: f64,
    pub final_distance: f64,
}

impl NearestNeighborTrace {
    pub fn final_index(&self) -> usize {
        *self.mu_star.last().expect("non-empty trace")
    }
}

pub fn track_nearest(traj: &Trajectory, data: &Dataset) -> Result<NearestNeighborTrace> {
    if traj.is_empty() {
        return invalid("empty trajectory");
    }
    if traj.states.ncols() != data.d() {
        return invalid(format!(
            "trajectory dimension {} vs dataset {}",
            traj.states.ncols(),
            data.d()
        ));
    }
    let (mu_star, distances): (Vec<usize>, Vec<f64>) =
        (0..traj.len()).map(|k| nearest_atom(traj.state(k), data)).unzip();
    let last_change = (1..mu_star.len()).rev().find(|&k| mu_star[k] != mu_star[k - 1]);
    let t_hat_c = traj.times[last_change.unwrap_or(0)];
    let final_distance = *distances.last().expect("non-empty");
    Ok(NearestNeighborTrace {
        times: traj.times.clone(),
        mu_star,
        distances,
        t_hat_c,
        final_distance,
    })
}
