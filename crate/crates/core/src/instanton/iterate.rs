//! Damped fixed-point iteration on the composed forward/backward map.

use nalgebra::DVector;

use super::field::SaddleField;
use super::passes::{backward_pass, forward_pass};
use crate::error::{Error, Result};
use crate::policy::BanditSpec;

/// Image `f(y; ir_hat)` of the saddle-point map: a forward pass driven by the
/// conjugates of `y`, then a backward pass over the resulting trajectory.
pub fn apply_map(y: &SaddleField, ir_hat: f64, spec: &BanditSpec) -> Result<SaddleField> {
    let (n, s) = forward_pass(&y.is_hat, &y.in_hat, ir_hat, spec, y.variant)?;
    let (is_hat, in_hat) = backward_pass(&n, &s, ir_hat, spec, y.variant)?;
    Ok(SaddleField {
        s,
        n,
        is_hat,
        in_hat,
        ir_hat,
        ..y.clone()
    })
}

/// `alpha f(y) + (1 - alpha) y`, with `ir_hat` held fixed.
pub fn fixed_point_step(y: &SaddleField, alpha: f64, spec: &BanditSpec) -> Result<SaddleField> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("damping must lie in (0, 1], got {alpha}")));
    }
    let image = apply_map(y, y.ir_hat, spec)?;
    if alpha == 1.0 {
        return Ok(image);
    }
    let mut out = image;
    out.s = &out.s * alpha + &y.s * (1.0 - alpha);
    out.n = &out.n * alpha + &y.n * (1.0 - alpha);
    out.is_hat = &out.is_hat * alpha + &y.is_hat * (1.0 - alpha);
    out.in_hat = &out.in_hat * alpha + &y.in_hat * (1.0 - alpha);
    Ok(out)
}

/// Regret constraint violation `sum_k s_k^T + r - (T + K) mu_*`.
pub fn constraint_gap(y: &SaddleField, spec: &BanditSpec, r: f64) -> f64 {
    y.total_reward() + r - spec.oracle_reward()
}

/// New `ir_hat` from the linearized terminal response
/// `s_k^T(ir_hat) = -ir_hat sigma_k^2 n_k^T + const`.
pub fn update_r_hat(y: &SaddleField, spec: &BanditSpec, r: f64) -> Result<f64> {
    if spec.gamma() <= 0.0 {
        return Err(Error::Domain("zero noise: the regret constraint cannot be steered".into()));
    }
    let t = y.horizon();
    let stiffness: f64 = (0..y.arms()).map(|k| spec.variance(k) * y.n[(k, t)]).sum();
    Ok(y.ir_hat + constraint_gap(y, spec, r) / stiffness)
}

/// Residual vector `[y - f(y; ir_hat); constraint gap]`.
pub fn residual_vector(y: &SaddleField, spec: &BanditSpec, r: f64) -> Result<DVector<f64>> {
    let image = apply_map(y, y.ir_hat, spec)?;
    let mut v = y.pack() - image.pack();
    let len = v.len();
    v = v.insert_row(len, constraint_gap(y, spec, r));
    Ok(v)
}

/// `|y - f(y; ir_hat)|^2 + gap^2`; infinite if the map cannot be evaluated.
pub fn residual(y: &SaddleField, spec: &BanditSpec, r: f64) -> f64 {
    residual_vector(y, spec, r)
        .map(|v| v.norm_squared())
        .unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    pub alpha: f64,
    pub alpha_min: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            alpha_min: 0.01,
            max_iter: 3000,
            tol: 1e-10,
        }
    }
}

/// Alternates damped map steps with `ir_hat` updates until the residual
/// drops below `tol` or the iteration budget is spent. Damping halves every
/// time the residual grows, down to `alpha_min`. Returns the iterate with the
/// smallest residual seen.
pub fn fixed_point_iterate(
    y0: &SaddleField,
    spec: &BanditSpec,
    r: f64,
    opts: &FixedPointOptions,
) -> Result<SaddleField> {
    let mut y = y0.clone();
    y.regret = r;
    let mut alpha = opts.alpha;
    let mut res = residual(&y, spec, r);
    let mut best = y.clone();
    best.residual = res;
    for _ in 0..opts.max_iter {
        if res <= opts.tol {
            break;
        }
        let mut next = match fixed_point_step(&y, alpha, spec) {
            Ok(v) => v,
            Err(_) => break,
        };
        next.ir_hat = y.ir_hat + alpha * (update_r_hat(&next, spec, r)? - y.ir_hat);
        let next_res = residual(&next, spec, r);
        if !next_res.is_finite() {
            break;
        }
        if next_res > res {
            alpha = (alpha * 0.5).max(opts.alpha_min);
        }
        y = next;
        res = next_res;
        if res < best.residual {
            best = y.clone();
            best.residual = res;
        }
    }
    best.converged = best.residual <= opts.tol;
    Ok(best)
}
