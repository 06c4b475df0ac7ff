//! Nash equilibria of a distributed-learning game in which every node picks
//! both its model parameters and the weights of its outgoing links.
//!
//! Two solver families are provided: a commutative scheme that alternates
//! best-response learning with network formation ([`commutative`]), and
//! concurrent online mirror descent over the joint strategy ([`omd`]).
//! [`streaming`] updates a single node's action as data arrives.

pub mod commutative;
pub mod data;
pub mod error;
pub mod game;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod omd;
pub mod streaming;
pub mod trace;

pub use error::{Error, Result};
pub use losses::{LogisticLoss, LossSpec, QuadraticLoss};
pub use model::{ActionBox, GameConfig, LearningProfile, NetworkWeights, SolverSettings, StrategyProfile};
pub use trace::{Layer, RunTrace, TraceRecord};
