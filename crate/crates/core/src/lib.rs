//! Regret statistics of the softmax-UCB multi-armed bandit.
//!
//! The crate treats a K-armed Gaussian bandit played by a softmax-over-UCB
//! policy as a stochastic dynamical system and offers two views of its
//! cumulative regret:
//!
//! * [`sim`]: a reproducible parallel Monte Carlo engine producing regret
//!   histograms, the empirical action `-log P(r)` and trajectory statistics
//!   conditioned on a regret window;
//! * [`instanton`]: a solver for the small-noise saddle-point equations of
//!   the path-integral representation of `P(r)`, giving the rate function
//!   `I(r)` and the dominant trajectory at each regret.
//!
//! [`toy`] treats the two-arm, one-step system exactly, and [`policy`] holds
//! the UCB/softmax kernel shared by everything else.

pub mod error;
pub mod instanton;
pub mod policy;
pub mod sim;
pub mod toy;

pub use error::{Error, Result};
pub use instanton::{
    action_value, most_probable_regret, rate_curve, solve_saddle, RateCurve, RateOptions,
    SaddleField, SolveStrategy, SolverOptions, Variant,
};
pub use policy::{BanditSpec, PolicyEval};
pub use sim::{
    empirical_action, run_ensemble, run_episode, ConditionedStats, EnsembleConfig,
    RegretHistogram, Trajectory,
};
pub use toy::{critical_regret, find_branches, g_of_delta_s, ToyBranch, ToySpec};
