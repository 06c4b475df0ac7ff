//! Concurrent equilibrium seeking by multi-agent online mirror descent.
//!
//! Every player takes a mirror step along its own payoff gradient each round,
//! all players at once, through the prox-mapping of a distance-generating
//! function. Observed neighbour actions may carry zero-mean noise.

mod geometry;
mod noise;
mod projection;
mod prox;
mod run;

pub use geometry::{bregman_divergence, BregmanGeometry};
pub use noise::{noisy_feedback, round_rng, NoiseModel};
pub use projection::project_budget_box;
pub use prox::{prox_map, StrategyBlock};
pub use run::{omd_run, OmdOutcome, OmdSettings, StepSchedule};
