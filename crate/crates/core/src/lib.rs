//! Speciation and collapse regimes of generative diffusion under the exact
//! empirical score.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod collapse;
pub mod dataset;
pub mod error;
pub mod mixture;
pub mod nearest;
pub mod numerics;
pub mod rng;
pub mod score;
pub mod sde;
pub mod speciation;
pub mod time;

pub use analytics::{gamma, gm_excess_entropy_analytic, tc_closed_form};
pub use collapse::{collapse_time_from_curve, entropy_mc, excess_entropy_curve, s_sep, EntropyCurve};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use mixture::{sample_gaussian_mixture, GmSpec};
pub use nearest::{track_nearest, NearestNeighborTrace};
pub use rng::RngPolicy;
pub use score::{gm_population_score, EmpiricalDensity, LogDensityResult};
pub use sde::{backward_integrate, clone_at, forward_sample, BackwardConfig, ClonePair, ScoreSource, Trajectory};
pub use speciation::{covariance, crossing_time, phi_speciation_mc, speciation_time, PhiCurve, SpectralReport};
pub use time::{alpha_param, delta, DiscreteSchedule, Spacing, TimeSchedule};
