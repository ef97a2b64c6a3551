//! Newton polishing of the saddle-point system.
//!
//! The iteration shoots on the conjugates: unknowns are `[is_hat, in_hat,
//! ir_hat]`, the forward pass supplies `s` and `n`, and the equations are
//! `conjugates - backward(forward(conjugates))` plus the regret constraint.
//! The Jacobian is formed by central differences.
//!
//! Unknowns and their equations are multiplied by `gamma`. Under
//! `gamma -> k gamma` the conjugates scale as `1 / k`, so in these units the
//! iteration, including step sizes and line search, does not depend on the
//! noise level.

use nalgebra::{DMatrix, DVector};

use super::field::SaddleField;
use super::iterate::{apply_map, constraint_gap, residual};
use crate::error::Result;
use crate::policy::BanditSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub field: SaddleField,
    pub iterations: usize,
    pub singular_steps: usize,
}

fn pack(y: &SaddleField, g: f64) -> DVector<f64> {
    let m = y.s.len();
    let mut z = DVector::zeros(2 * m + 1);
    z.rows_mut(0, m).copy_from_slice(y.is_hat.as_slice());
    z.rows_mut(m, m).copy_from_slice(y.in_hat.as_slice());
    z[2 * m] = y.ir_hat;
    z * g
}

fn unpack(template: &SaddleField, z: &DVector<f64>, g: f64) -> SaddleField {
    let m = template.s.len();
    let mut y = template.clone();
    y.is_hat.copy_from_slice(&z.as_slice()[..m]);
    y.in_hat.copy_from_slice(&z.as_slice()[m..2 * m]);
    y.ir_hat = z[2 * m];
    y.is_hat /= g;
    y.in_hat /= g;
    y.ir_hat /= g;
    y
}

/// Field with the conjugates of `z` and the forward trajectory they drive,
/// and the scaled residual.
fn eval(template: &SaddleField, z: &DVector<f64>, g: f64, spec: &BanditSpec, r: f64) -> Option<(DVector<f64>, SaddleField)> {
    let y = unpack(template, z, g);
    let image = apply_map(&y, y.ir_hat, spec).ok()?;
    let m = y.s.len();
    let mut f = DVector::zeros(2 * m + 1);
    for (i, (a, b)) in y.is_hat.iter().zip(image.is_hat.iter()).enumerate() {
        f[i] = g * (a - b);
    }
    for (i, (a, b)) in y.in_hat.iter().zip(image.in_hat.iter()).enumerate() {
        f[m + i] = g * (a - b);
    }
    f[2 * m] = constraint_gap(&image, spec, r);
    if !f.iter().all(|x| x.is_finite()) {
        return None;
    }
    let field = SaddleField {
        is_hat: y.is_hat,
        in_hat: y.in_hat,
        ..image
    };
    Some((f, field))
}

fn jacobian(
    template: &SaddleField,
    z: &DVector<f64>,
    g: f64,
    spec: &BanditSpec,
    r: f64,
    fd_step: f64,
) -> Option<DMatrix<f64>> {
    let dim = z.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut probe = z.clone();
    for j in 0..dim {
        let h = fd_step * z[j].abs().max(1.0);
        probe[j] = z[j] + h;
        let (plus, _) = eval(template, &probe, g, spec, r)?;
        probe[j] = z[j] - h;
        let (minus, _) = eval(template, &probe, g, spec, r)?;
        probe[j] = z[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Some(jac)
}

/// Solves `J dz = -F`, falling back to the SVD pseudo-inverse when the LU
/// factorization is singular. The flag reports the fallback.
fn newton_direction(jac: DMatrix<f64>, f: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    let rhs = -f;
    if let Some(dz) = jac.clone().lu().solve(&rhs) {
        if dz.iter().all(|v| v.is_finite()) {
            return Some((dz, false));
        }
    }
    // `svd` iterates without limit; badly scaled Jacobians can stall it.
    let svd = jac.try_svd(true, true, f64::EPSILON, 500)?;
    let cutoff = 1e-12 * svd.singular_values.max();
    svd.solve(&rhs, cutoff)
        .ok()
        .filter(|dz| dz.iter().all(|v| v.is_finite()))
        .map(|dz| (dz, true))
}

/// Newton iteration with backtracking on the squared residual.
///
/// Once below `tol`, a few extra steps polish the solution down to rounding
/// level so that the constraint and counting identities hold tightly.
/// Non-convergence is reported through `field.converged`, never as an error.
pub fn newton_refine(
    y0: &SaddleField,
    spec: &BanditSpec,
    r: f64,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let polish = opts.tol * 1e-12;
    let mut template = y0.clone();
    template.regret = r;
    let g = spec.gamma();
    let mut z = pack(&template, g);
    let (mut f, mut current) = match eval(&template, &z, g, spec, r) {
        Some(pair) => pair,
        None => {
            let mut field = template;
            field.residual = f64::INFINITY;
            field.converged = false;
            return Ok(NewtonReport { field, iterations: 0, singular_steps: 0 });
        }
    };
    let mut res = f.norm_squared();
    let mut iterations = 0;
    let mut singular_steps = 0;

    while res > polish && iterations < opts.max_iter {
        let Some(jac) = jacobian(&template, &z, g, spec, r, opts.fd_step) else {
            break;
        };
        let Some((dz, singular)) = newton_direction(jac, &f) else {
            break;
        };
        if singular {
            singular_steps += 1;
            log::debug!("singular saddle Jacobian at r = {r}, using pseudo-inverse");
        }
        iterations += 1;

        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= 1.0 / 1024.0 {
            let trial = &z + &dz * lambda;
            if let Some((ft, yt)) = eval(&template, &trial, g, spec, r) {
                let rt = ft.norm_squared();
                if rt < (1.0 - 1e-4 * lambda) * res {
                    accepted = Some((trial, ft, rt, yt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, ft, rt, yt)) => {
                z = trial;
                f = ft;
                res = rt;
                current = yt;
            }
            None => break,
        }
    }

    let mut field = current;
    let res = residual(&field, spec, r);
    field.residual = res;
    // One map application restores n^0 = 1 and the terminal data exactly.
    if let Ok(image) = apply_map(&field, field.ir_hat, spec) {
        let image_res = residual(&image, spec, r);
        if image_res <= res.max(opts.tol * 1e-3) {
            field = image;
            field.residual = image_res;
        }
    }
    field.converged = field.residual <= opts.tol;
    Ok(NewtonReport {
        field,
        iterations,
        singular_steps,
    })
}
