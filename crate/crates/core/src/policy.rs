//! Softmax-UCB policy kernel.
//!
//! Pull counts are real-valued throughout: the saddle-point equations treat
//! them as continuous fields, and integer counts from the simulator embed
//! exactly.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Arms, horizon and policy parameters of a Gaussian bandit.
///
/// Arm `k` pays `N(mu[k], gamma * sigma_tilde[k]^2)`. The policy pulls arm
/// `k` at step `t + 1` with probability `softmax(beta * B^t)_k` where
/// `B_k^t = s_k/n_k + c * sqrt(ln(K + t) / n_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BanditSpec {
    arms: usize,
    horizon: usize,
    mu: Vec<f64>,
    sigma_tilde: Vec<f64>,
    gamma: f64,
    beta: f64,
    c: f64,
    mu_star: f64,
}

impl BanditSpec {
    pub fn new(
        mu: Vec<f64>,
        sigma_tilde: Vec<f64>,
        horizon: usize,
        gamma: f64,
        beta: f64,
        c: f64,
    ) -> Result<Self> {
        let spec = Self::new_unchecked(mu, sigma_tilde, horizon, gamma, beta, c)?;
        if spec.arms < 2 {
            return Err(Error::InvalidSpec("at least two arms are required".into()));
        }
        Ok(spec)
    }

    /// Same as [`BanditSpec::new`] but accepts a single arm. Only useful for
    /// checking the simulator against the plain Gaussian random walk.
    pub fn single_arm(mu: f64, sigma_tilde: f64, horizon: usize, gamma: f64) -> Result<Self> {
        Self::new_unchecked(vec![mu], vec![sigma_tilde], horizon, gamma, 1.0, 0.0)
    }

    fn new_unchecked(
        mu: Vec<f64>,
        sigma_tilde: Vec<f64>,
        horizon: usize,
        gamma: f64,
        beta: f64,
        c: f64,
    ) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidSpec("no arms".into()));
        }
        if mu.len() != sigma_tilde.len() {
            return Err(Error::InvalidSpec(format!(
                "{} means but {} deviations",
                mu.len(),
                sigma_tilde.len()
            )));
        }
        if horizon < 1 {
            return Err(Error::InvalidSpec("horizon must be at least 1".into()));
        }
        if mu.iter().chain(&sigma_tilde).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite arm parameter".into()));
        }
        if sigma_tilde.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec("negative arm deviation".into()));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidSpec(format!("beta must be >= 0, got {beta}")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidSpec(format!("c must be >= 0, got {c}")));
        }
        let mu_star = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            arms: mu.len(),
            horizon,
            mu,
            sigma_tilde,
            gamma,
            beta,
            c,
            mu_star,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma_tilde(&self) -> &[f64] {
        &self.sigma_tilde
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mu_star(&self) -> f64 {
        self.mu_star
    }

    /// Reward variance of arm `k`, `gamma * sigma_tilde_k^2`.
    pub fn variance(&self, k: usize) -> f64 {
        self.gamma * self.sigma_tilde[k] * self.sigma_tilde[k]
    }

    /// Total number of pulls over an episode, warm-up included.
    pub fn total_pulls(&self) -> usize {
        self.horizon + self.arms
    }

    /// `(T + K) * mu_star`, the reward an oracle player expects.
    pub fn oracle_reward(&self) -> f64 {
        self.total_pulls() as f64 * self.mu_star
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new_unchecked(
            self.mu.clone(),
            self.sigma_tilde.clone(),
            self.horizon,
            gamma,
            self.beta,
            self.c,
        )
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new_unchecked(
            self.mu.clone(),
            self.sigma_tilde.clone(),
            self.horizon,
            self.gamma,
            beta,
            self.c,
        )
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new_unchecked(
            self.mu.clone(),
            self.sigma_tilde.clone(),
            self.horizon,
            self.gamma,
            self.beta,
            c,
        )
    }

    /// `c * sqrt(ln(K + t))`, the numerator of the exploration bonus.
    #[inline]
    pub fn bonus_scale(&self, t: usize) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.c * ((self.arms + t) as f64).ln().sqrt()
        }
    }
}

/// Everything the policy needs at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEval {
    /// UCB indices `B_k^t`.
    pub b: Vec<f64>,
    /// `dB_k/ds_k`.
    pub b_s: Vec<f64>,
    /// `dB_k/dn_k`.
    pub b_n: Vec<f64>,
    /// `softmax(beta * B)`.
    pub rho: Vec<f64>,
    /// Jacobian of the softmax at `beta * B`.
    pub jac: DMatrix<f64>,
}

impl PolicyEval {
    pub fn new(s: &[f64], n: &[f64], t: usize, spec: &BanditSpec) -> Result<Self> {
        let k = spec.arms();
        let mut b = Vec::with_capacity(k);
        let mut b_s = Vec::with_capacity(k);
        let mut b_n = Vec::with_capacity(k);
        for (&sk, &nk) in s.iter().zip(n) {
            b.push(ucb_index(sk, nk, t, spec)?);
            let (ds, dn) = ucb_partials(sk, nk, t, spec)?;
            b_s.push(ds);
            b_n.push(dn);
        }
        let scaled: Vec<f64> = b.iter().map(|v| spec.beta() * v).collect();
        let rho = softmax(&scaled);
        let jac = jacobian_from_probabilities(&rho);
        Ok(Self {
            b,
            b_s,
            b_n,
            rho,
            jac,
        })
    }
}

fn check_count(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("pull count must be positive, got {n}")))
    }
}

/// UCB index `s/n + c * sqrt(ln(K + t) / n)`.
pub fn ucb_index(s: f64, n: f64, t: usize, spec: &BanditSpec) -> Result<f64> {
    check_count(n)?;
    Ok(s / n + spec.bonus_scale(t) / n.sqrt())
}

/// Partial derivatives `(dB/ds, dB/dn)` of [`ucb_index`].
pub fn ucb_partials(s: f64, n: f64, t: usize, spec: &BanditSpec) -> Result<(f64, f64)> {
    check_count(n)?;
    let b_s = 1.0 / n;
    let b_n = -s / (n * n) - 0.5 * spec.bonus_scale(t) / (n * n.sqrt());
    Ok((b_s, b_n))
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out);
    out
}

/// Softmax written into a caller-provided buffer.
#[inline]
pub fn softmax_into(v: &[f64], out: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Jacobian `d softmax_k / d v_j = delta_kj rho_k - rho_k rho_j`.
pub fn softmax_jacobian(v: &[f64]) -> DMatrix<f64> {
    jacobian_from_probabilities(&softmax(v))
}

pub(crate) fn jacobian_from_probabilities(rho: &[f64]) -> DMatrix<f64> {
    let k = rho.len();
    DMatrix::from_fn(k, k, |i, j| {
        let diag = if i == j { rho[i] } else { 0.0 };
        diag - rho[i] * rho[j]
    })
}

/// Probability of pulling each arm next, given sums `s`, counts `n` at step `t`.
pub fn policy_probabilities(s: &[f64], n: &[f64], t: usize, spec: &BanditSpec) -> Result<Vec<f64>> {
    let scaled = s
        .iter()
        .zip(n)
        .map(|(&sk, &nk)| ucb_index(sk, nk, t, spec).map(|b| spec.beta() * b))
        .collect::<Result<Vec<_>>>()?;
    Ok(softmax(&scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec3(c: f64, beta: f64) -> BanditSpec {
        BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.36, beta, c).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(BanditSpec::new(vec![1.0], vec![1.0], 5, 1.0, 1.0, 0.0).is_err());
        assert!(BanditSpec::new(vec![1.0, 2.0], vec![1.0], 5, 1.0, 1.0, 0.0).is_err());
        assert!(BanditSpec::new(vec![1.0, 2.0], vec![1.0; 2], 0, 1.0, 1.0, 0.0).is_err());
        assert!(BanditSpec::new(vec![1.0, 2.0], vec![1.0; 2], 3, -1.0, 1.0, 0.0).is_err());
        let spec = BanditSpec::new(vec![4.0, 2.0], vec![1.0; 2], 3, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(spec.mu_star(), 4.0);
        assert_eq!(spec.oracle_reward(), 20.0);
    }

    #[test]
    fn ucb_index_examples() {
        let c0 = spec3(0.0, 10.0);
        let c1 = spec3(1.0, 10.0);
        assert_eq!(ucb_index(2.0, 1.0, 0, &c0).unwrap(), 2.0);
        // 2 + sqrt(ln 3) evaluated to high precision offline.
        assert_relative_eq!(
            ucb_index(2.0, 1.0, 0, &c1).unwrap(),
            3.048_147_073_968_205,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            ucb_index(4.0, 4.0, 0, &c1).unwrap(),
            1.0 + 3f64.ln().sqrt() / 2.0,
            max_relative = 1e-15
        );
        assert!(matches!(ucb_index(1.0, 0.0, 0, &c1), Err(Error::Domain(_))));
        assert!(ucb_partials(1.0, -1.0, 0, &c1).is_err());
    }

    #[test]
    fn ucb_partials_examples() {
        let (bs, bn) = ucb_partials(3.0, 1.0, 0, &spec3(0.0, 10.0)).unwrap();
        assert_eq!((bs, bn), (1.0, -3.0));
        let (bs, bn) = ucb_partials(0.0, 1.0, 0, &spec3(1.0, 10.0)).unwrap();
        assert_eq!(bs, 1.0);
        assert_relative_eq!(bn, -3f64.ln().sqrt() / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for v in p {
            assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-15);
        }
        let p = softmax(&[0.0, 10.0]);
        let e10 = 10f64.exp();
        assert_relative_eq!(p[0], 1.0 / (1.0 + e10), max_relative = 1e-13);
        assert_relative_eq!(p[1], e10 / (1.0 + e10), max_relative = 1e-15);
        // would overflow without max-subtraction
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_jacobian_examples() {
        let j = softmax_jacobian(&[0.0, 0.0]);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
        let j = softmax_jacobian(&[0.0, 20.0, 0.0]);
        assert!(j.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn policy_probability_examples() {
        let spec = spec3(0.4, 10.0);
        let p = policy_probabilities(&[2.0; 3], &[2.0; 3], 4, &spec).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let flat = spec.with_beta(0.0).unwrap();
        let p = policy_probabilities(&[1.0, 5.0, -3.0], &[1.0, 2.0, 7.0], 4, &flat).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));

        // Independent evaluation: bonus 0.4*sqrt(ln 3) is common to all arms,
        // so the answer is softmax(10 * [1, 2, 3]) = e^{10 k} / sum.
        let p = policy_probabilities(&[1.0, 2.0, 3.0], &[1.0; 3], 0, &spec).unwrap();
        let z = 1.0 + (-10f64).exp() + (-20f64).exp();
        let expected = [(-20f64).exp() / z, (-10f64).exp() / z, 1.0 / z];
        for (a, b) in p.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        assert!(policy_probabilities(&[1.0; 3], &[1.0, 0.0, 1.0], 0, &spec).is_err());
    }

    #[test]
    fn ucb_bonus_decays_with_count() {
        for &c in &[0.1, 0.4, 1.0] {
            let spec = spec3(c, 10.0);
            for &mu in &[0.0, 1.0, 3.0] {
                for t in [0usize, 5, 19] {
                    let mut last = f64::INFINITY;
                    for i in 1..=(t + 3) {
                        let n = i as f64;
                        let b = ucb_index(mu * n, n, t, &spec).unwrap();
                        assert!(b < last);
                        last = b;
                    }
                }
            }
        }
    }

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_shift_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 2..8),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&v);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_jacobian_matches_finite_differences(
            v in prop::collection::vec(-3.0f64..3.0, 2..6),
        ) {
            let j = softmax_jacobian(&v);
            let k = v.len();
            for row in 0..k {
                let row_sum: f64 = (0..k).map(|col| j[(row, col)]).sum();
                prop_assert!(row_sum.abs() <= 1e-12);
                prop_assert!(j[(row, row)] > 0.0);
                for col in 0..k {
                    prop_assert_eq!(j[(row, col)], j[(col, row)]);
                    let fd = central_diff(
                        |x| {
                            let mut w = v.clone();
                            w[col] = x;
                            softmax(&w)[row]
                        },
                        v[col],
                        1e-6,
                    );
                    let exact = j[(row, col)];
                    prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3),
                        "row {} col {}: fd {} exact {}", row, col, fd, exact);
                }
            }
        }

        #[test]
        fn ucb_partials_match_finite_differences(
            s in -30.0f64..30.0,
            n_frac in 0.0f64..1.0,
            t in 0usize..20,
            c in 0.0f64..2.0,
        ) {
            let spec = spec3(c, 10.0);
            let n = 1.0 + n_frac * (spec.total_pulls() as f64 - 1.0);
            let (bs, bn) = ucb_partials(s, n, t, &spec).unwrap();
            let h = 1e-5;
            let fd_s = central_diff(|x| ucb_index(x, n, t, &spec).unwrap(), s, h);
            let fd_n = central_diff(|x| ucb_index(s, x, t, &spec).unwrap(), n, h);
            prop_assert!((fd_s - bs).abs() <= 1e-6 * bs.abs().max(1e-2));
            prop_assert!((fd_n - bn).abs() <= 1e-6 * bn.abs().max(1e-2),
                "fd {} exact {}", fd_n, bn);
        }
    }
}
