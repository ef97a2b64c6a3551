//! Monte Carlo simulation of the softmax-UCB bandit.

mod conditioned;
mod ensemble;
mod episode;
mod histogram;
pub mod rng;

pub use conditioned::ConditionedStats;
pub use ensemble::{conditioned_trajectory_stats, run_ensemble, EnsembleConfig, EnsembleResult};
pub use episode::{run_episode, Trajectory};
pub use histogram::{empirical_action, RegretHistogram};
