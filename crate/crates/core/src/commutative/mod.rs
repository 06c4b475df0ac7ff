//! The two-layer (commutative) solver: best responses over a fixed network,
//! network formation over fixed learning actions, and the outer loop that
//! alternates them. Also hosts the joint potential minimization and the
//! consensus baseline used for welfare comparisons.

mod admm;
mod algorithm;
mod best_response;
mod brd;
mod formation;
mod groups;
mod welfare;

pub use admm::{admm_symmetric, formation_objective, AdmmSettings};
pub use algorithm::{initial_profile, joint_minimize, minimize_potential_learning, run_algorithm1, run_algorithm1_from};
pub use best_response::{best_response, best_response_unconstrained};
pub use brd::{brd_run, BrdSettings, UpdateOrder};
pub use formation::formation_greedy;
pub use groups::{direction_group_decomposition, GroupSpec, GroupSums};
pub use welfare::{consensus_baseline, welfare_gap, WelfareGap};
