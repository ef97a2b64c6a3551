//! Saddle-point (instanton) equations of the regret path integral.
//!
//! The composed map `f = backward o forward` is iterated with damping, then
//! polished with Newton; multistarts and continuation in `r` collect the
//! coexisting branches and the minimal-action one defines the rate function.

mod field;
pub mod iterate;
pub mod newton;
mod passes;
mod rate;
mod solve;

pub use field::{action_value, SaddleField, Variant};
pub use iterate::{apply_map, fixed_point_step, residual, update_r_hat};
pub use newton::newton_refine;
pub use passes::{backward_pass, forward_pass};
pub use rate::{detect_kinks, most_probable_regret, rate_curve, RateCurve, RateOptions};
pub use solve::{
    blend, noiseless_field, refine, solve_saddle, starting_points, tilt_toward, warmup_seed, SolveStrategy,
    SolverOptions,
};
