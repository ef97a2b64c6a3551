//! Time-forward sweep for the order parameters and time-backward sweep for
//! the conjugate fields.

use nalgebra::DMatrix;

use super::field::Variant;
use crate::error::{Error, Result};
use crate::policy::{softmax_into, BanditSpec};

/// Pull counts and reward sums generated by the conjugate fields.
///
/// The terminal column of `is_hat` is replaced by `-ir_hat`. Counts follow
/// `n^t = n^{t-1} + rho(h^t)` with `h^t = beta B^{t-1}` (plus the future
/// `in_hat` sum for [`Variant::Full`]), and sums follow
/// `s^t = mu n^t + sigma^2 sum_t' is^t' n^min(t,t')`.
pub fn forward_pass(
    is_hat: &DMatrix<f64>,
    in_hat: &DMatrix<f64>,
    ir_hat: f64,
    spec: &BanditSpec,
    variant: Variant,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k_arms = spec.arms();
    let horizon = spec.horizon();
    let beta = spec.beta();
    let mu = spec.mu();
    let var: Vec<f64> = (0..k_arms).map(|k| spec.variance(k)).collect();

    let conj_s = |k: usize, t: usize| if t == horizon { -ir_hat } else { is_hat[(k, t)] };

    // tail_s[k][t] = sum_{t' > t} is^t'
    let mut tail_s: DMatrix<f64> = DMatrix::zeros(k_arms, horizon + 1);
    let mut tail_n: DMatrix<f64> = DMatrix::zeros(k_arms, horizon + 1);
    for k in 0..k_arms {
        for t in (0..horizon).rev() {
            tail_s[(k, t)] = tail_s[(k, t + 1)] + conj_s(k, t + 1);
            tail_n[(k, t)] = tail_n[(k, t + 1)] + in_hat[(k, t + 1)];
        }
    }

    let mut n: DMatrix<f64> = DMatrix::zeros(k_arms, horizon + 1);
    let mut s: DMatrix<f64> = DMatrix::zeros(k_arms, horizon + 1);
    // prefix[k] = sum_{t' <= t} is^t' n^t'
    let mut prefix: Vec<f64> = vec![0.0; k_arms];
    let mut h: Vec<f64> = vec![0.0; k_arms];
    let mut rho = vec![0.0; k_arms];

    for k in 0..k_arms {
        n[(k, 0)] = 1.0;
        prefix[k] = conj_s(k, 0);
        s[(k, 0)] = mu[k] + var[k] * (prefix[k] + tail_s[(k, 0)]);
    }
    for t in 1..=horizon {
        let bonus = spec.bonus_scale(t - 1);
        for k in 0..k_arms {
            let nk: f64 = n[(k, t - 1)];
            let b = s[(k, t - 1)] / nk + bonus / nk.sqrt();
            h[k] = beta * b;
            if variant == Variant::Full {
                h[k] += tail_n[(k, t - 1)];
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite policy field at step {t}")));
        }
        softmax_into(&h, &mut rho);
        for k in 0..k_arms {
            let nk = n[(k, t - 1)] + rho[k];
            n[(k, t)] = nk;
            prefix[k] += conj_s(k, t) * nk;
            s[(k, t)] = mu[k] * nk + var[k] * (prefix[k] + nk * tail_s[(k, t)]);
        }
    }
    if n.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numeric("non-positive pull count".into()));
    }
    Ok((n, s))
}

/// Conjugate fields generated by the trajectory `(n, s)`.
///
/// Terminal data: `is^T = -ir_hat`, `in^T = mu is^T + sigma^2 (is^T)^2 / 2`.
/// For `t < T` the fields follow from the tilt of the arm-choice softmax
/// at step `t + 1` by the future `in_hat` sums.
pub fn backward_pass(
    n: &DMatrix<f64>,
    s: &DMatrix<f64>,
    ir_hat: f64,
    spec: &BanditSpec,
    variant: Variant,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k_arms = spec.arms();
    let horizon = spec.horizon();
    let beta = spec.beta();
    let mu = spec.mu();
    let var: Vec<f64> = (0..k_arms).map(|k| spec.variance(k)).collect();

    let mut is_hat: DMatrix<f64> = DMatrix::zeros(k_arms, horizon + 1);
    let mut in_hat: DMatrix<f64> = DMatrix::zeros(k_arms, horizon + 1);
    let mut tail_s: Vec<f64> = vec![0.0; k_arms];
    let mut tail_n: Vec<f64> = vec![0.0; k_arms];
    for k in 0..k_arms {
        let a = -ir_hat;
        is_hat[(k, horizon)] = a;
        in_hat[(k, horizon)] = mu[k] * a + 0.5 * var[k] * a * a;
        tail_s[k] = a;
        tail_n[k] = in_hat[(k, horizon)];
    }

    let mut field = vec![0.0; k_arms];
    let mut rho = vec![0.0; k_arms];
    let mut tilt = vec![0.0; k_arms];
    let mut b_s = vec![0.0; k_arms];
    let mut b_n = vec![0.0; k_arms];
    for t in (0..horizon).rev() {
        let bonus = spec.bonus_scale(t);
        for k in 0..k_arms {
            let nk = n[(k, t)];
            if !(nk > 0.0) {
                return Err(Error::Numeric(format!("non-positive pull count at step {t}")));
            }
            let sq = nk.sqrt();
            field[k] = beta * (s[(k, t)] / nk + bonus / sq);
            b_s[k] = 1.0 / nk;
            b_n[k] = -s[(k, t)] / (nk * nk) - 0.5 * bonus / (nk * sq);
        }
        softmax_into(&field, &mut rho);
        match variant {
            Variant::Simplified => {
                let mean: f64 = rho.iter().zip(&tail_n).map(|(p, f)| p * f).sum();
                for k in 0..k_arms {
                    tilt[k] = rho[k] * (tail_n[k] - mean);
                }
            }
            Variant::Full => tilted_difference(&rho, &tail_n, &mut tilt),
        }
        for k in 0..k_arms {
            let a = beta * b_s[k] * tilt[k];
            is_hat[(k, t)] = a;
            in_hat[(k, t)] =
                beta * b_n[k] * tilt[k] + mu[k] * a + var[k] * a * tail_s[k] + 0.5 * var[k] * a * a;
        }
        for k in 0..k_arms {
            tail_s[k] += is_hat[(k, t)];
            tail_n[k] += in_hat[(k, t)];
        }
    }
    Ok((is_hat, in_hat))
}

/// `softmax(v + f) - softmax(v)` given `rho = softmax(v)`, without the
/// cancellation of subtracting two nearly equal probability vectors.
fn tilted_difference(rho: &[f64], f: &[f64], out: &mut [f64]) {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = f.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = rho.iter().zip(&w).map(|(p, e)| p * e).sum();
    for k in 0..rho.len() {
        // sum_j rho_j (e^{f_k - m} - e^{f_j - m})
        let mut num = 0.0;
        for j in 0..rho.len() {
            let d = f[k] - f[j];
            let diff = if d.abs() < 1.0 { w[j] * d.exp_m1() } else { w[k] - w[j] };
            num += rho[j] * diff;
        }
        out[k] = rho[k] * num / z;
    }
}
