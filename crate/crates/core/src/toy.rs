//! Two arms, one step after the warm-up.
//!
//! The saddle-point equations collapse to one scalar equation in the
//! warm-up reward gap `ds = s_2^0 - s_1^0`:
//!
//! `g(ds) = -2 dmu beta gamma S(beta ds) (1 - S(beta ds)) ir(ds) + dmu - ds`
//!
//! with `ir(ds) = (dmu (S(beta ds) - 2) + r) / (3 gamma)`, `dmu = mu_2 - mu_1`
//! and `S` the logistic function. The exploration bonus is the same for both
//! arms at `t = 0` and drops out, so there is no `c` here.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instanton::{action_value, SaddleField, Variant};
use crate::policy::BanditSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToySpec {
    mu: [f64; 2],
    gamma: f64,
    beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyBranch {
    pub delta_s0: f64,
    pub ir_hat: f64,
    pub action: f64,
    /// Position in ascending `delta_s0` order.
    pub branch_id: usize,
    /// Set when the root is a tangency of `g` (only at the critical regret).
    pub double: bool,
}

/// Logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const ROOT_TOL: f64 = 1e-12;

impl ToySpec {
    pub fn new(mu: [f64; 2], gamma: f64, beta: f64) -> Result<Self> {
        if !(mu[0].is_finite() && mu[1].is_finite() && mu[1] > mu[0]) {
            return Err(Error::InvalidSpec(format!("need mu_2 > mu_1, got {mu:?}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidSpec(format!("gamma must be > 0, got {gamma}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidSpec(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { mu, gamma, beta })
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gap(&self) -> f64 {
        self.mu[1] - self.mu[0]
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.mu, gamma, self.beta)
    }

    /// The same system as a general bandit with unit `sigma_tilde`.
    pub fn to_bandit_spec(&self, c: f64) -> Result<BanditSpec> {
        BanditSpec::new(self.mu.to_vec(), vec![1.0, 1.0], 1, self.gamma, self.beta, c)
    }

    /// `ir_hat` as a function of the warm-up gap.
    pub fn ir_hat(&self, ds: f64, r: f64) -> f64 {
        let p = sigmoid(self.beta * ds);
        (self.gap() * (p - 2.0) + r) / (3.0 * self.gamma)
    }

    /// Regret at which every conjugate vanishes.
    pub fn most_probable_regret(&self) -> f64 {
        self.gap() * (2.0 - sigmoid(self.beta * self.gap()))
    }

    fn derivative(&self, ds: f64, r: f64) -> f64 {
        let (b, dmu) = (self.beta, self.gap());
        let p = sigmoid(b * ds);
        let u = p * (1.0 - p);
        let ir = self.ir_hat(ds, r);
        let dir = dmu * b * u / (3.0 * self.gamma);
        -2.0 * dmu * b * self.gamma * (b * u * (1.0 - 2.0 * p) * ir + u * dir) - 1.0
    }

    /// Default root-search interval, skewed towards an under-rewarded
    /// better arm.
    pub fn default_interval(&self, r: f64) -> (f64, f64) {
        let gap = self.gap();
        (gap - 3.0 * (r / gap).max(1.0), gap + 3.0)
    }
}

/// Left-hand side of the self-consistent equation.
pub fn g_of_delta_s(ds: f64, r: f64, toy: &ToySpec) -> f64 {
    let p = sigmoid(toy.beta * ds);
    let gap = toy.gap();
    -2.0 * gap * toy.beta * toy.gamma * p * (1.0 - p) * toy.ir_hat(ds, r) + gap - ds
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// All roots of `g` in `interval` (default [`ToySpec::default_interval`]).
///
/// The interval is cut at the zeros of `g'` located on a `grid_points` scan;
/// `g` is monotone on each piece, so each piece holds at most one root.
/// A critical point where `|g| <= 1e-12` is reported once, as a double root.
pub fn find_branches(
    r: f64,
    toy: &ToySpec,
    interval: Option<(f64, f64)>,
    grid_points: usize,
) -> Result<Vec<ToyBranch>> {
    let (a, b) = interval.unwrap_or_else(|| toy.default_interval(r));
    if !(a.is_finite() && b.is_finite() && a < b) || grid_points < 2 || !r.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "bad search setup: interval ({a}, {b}), {grid_points} points, r = {r}"
        )));
    }
    let g = |x: f64| g_of_delta_s(x, r, toy);
    let dg = |x: f64| toy.derivative(x, r);
    let step = (b - a) / (grid_points - 1) as f64;
    let xs: Vec<f64> = (0..grid_points).map(|i| a + step * i as f64).collect();

    let mut cuts = vec![a];
    for w in xs.windows(2) {
        let (d0, d1) = (dg(w[0]), dg(w[1]));
        if d0 == 0.0 {
            cuts.push(w[0]);
        } else if (d0 < 0.0) != (d1 < 0.0) && d1 != 0.0 {
            cuts.push(bisect(w[0], w[1], dg));
        }
    }
    cuts.push(b);
    cuts.dedup();

    let mut roots: Vec<(f64, bool)> = Vec::new();
    let is_interior = |x: f64| x > a && x < b;
    for (i, w) in cuts.windows(2).enumerate() {
        let (lo, hi) = (w[0], w[1]);
        let (g_lo, g_hi) = (g(lo), g(hi));
        if i > 0 && is_interior(lo) && g_lo.abs() <= ROOT_TOL {
            roots.push((lo, true));
            continue;
        }
        if g_lo.abs() > ROOT_TOL && g_hi.abs() > ROOT_TOL && (g_lo < 0.0) != (g_hi < 0.0) {
            roots.push((bisect(lo, hi, g), false));
        }
    }
    let last = *cuts.last().unwrap_or(&b);
    if g(last).abs() <= ROOT_TOL && !roots.iter().any(|&(x, _)| (x - last).abs() < step) {
        roots.push((last, false));
    }
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    roots.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-12 * x.0.abs().max(1.0));

    let mut branches = Vec::with_capacity(roots.len());
    for (id, (ds, double)) in roots.into_iter().enumerate() {
        if ds - a < step || b - ds < step {
            log::warn!("root {ds} lies within one grid cell of the search boundary ({a}, {b})");
        }
        let residual = g(ds).abs();
        if residual > ROOT_TOL {
            return Err(Error::Numeric(format!("root at {ds} not certified: |g| = {residual}")));
        }
        branches.push(ToyBranch {
            delta_s0: ds,
            ir_hat: toy.ir_hat(ds, r),
            action: 0.0,
            branch_id: id,
            double,
        });
    }
    for br in &mut branches {
        br.action = branch_action(br, r, toy)?;
    }
    Ok(branches)
}

/// Number of distinct roots of `g` at regret `r` on the default interval.
pub fn branch_count(r: f64, toy: &ToySpec, grid_points: usize) -> Result<usize> {
    Ok(find_branches(r, toy, None, grid_points)?.len())
}

/// Regret at which the single branch splits into three.
///
/// Needs one branch at `bracket.0` and three at `bracket.1`.
pub fn critical_regret(toy: &ToySpec, bracket: (f64, f64)) -> Result<f64> {
    const GRID: usize = 10_000;
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Bracket(format!("invalid bracket ({lo}, {hi})")));
    }
    let counts = (branch_count(lo, toy, GRID)?, branch_count(hi, toy, GRID)?);
    if counts != (1, 3) {
        return Err(Error::Bracket(format!(
            "branch counts at ({lo}, {hi}) are {counts:?}, expected (1, 3)"
        )));
    }
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if branch_count(mid, toy, GRID)? >= 2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Full saddle field of the branch, for a bandit with exploration constant
/// `c`. Only `in_hat^0` depends on `c`.
pub fn reconstruct(branch: &ToyBranch, r: f64, toy: &ToySpec, c: f64) -> Result<SaddleField> {
    let spec = toy.to_bandit_spec(c)?;
    let (mu, gamma, beta) = (toy.mu, toy.gamma, toy.beta);
    let ds = branch.delta_s0;
    let ir = toy.ir_hat(ds, r);
    let p2 = sigmoid(beta * ds);
    let rho = [1.0 - p2, p2];
    let a1 = beta * rho[0] * rho[1] * ir * toy.gap();
    let is0 = [a1, -a1];

    let mut y = SaddleField::zeros(&spec, Variant::Simplified);
    y.ir_hat = ir;
    y.regret = r;
    let mut tail_n = [0.0; 2];
    for k in 0..2 {
        let n1 = 1.0 + rho[k];
        y.n[(k, 0)] = 1.0;
        y.n[(k, 1)] = n1;
        y.s[(k, 0)] = mu[k] + gamma * (is0[k] - ir);
        y.s[(k, 1)] = mu[k] * n1 + gamma * (is0[k] - ir * n1);
        y.is_hat[(k, 0)] = is0[k];
        y.is_hat[(k, 1)] = -ir;
        tail_n[k] = -mu[k] * ir + 0.5 * gamma * ir * ir;
        y.in_hat[(k, 1)] = tail_n[k];
    }
    let bonus = spec.bonus_scale(0);
    let mean_tail = rho[0] * tail_n[0] + rho[1] * tail_n[1];
    for k in 0..2 {
        let s0 = y.s[(k, 0)];
        let b_n = -s0 - 0.5 * bonus;
        let tilt = rho[k] * (tail_n[k] - mean_tail);
        let a = is0[k];
        y.in_hat[(k, 0)] = beta * b_n * tilt + mu[k] * a + gamma * a * (-ir) + 0.5 * gamma * a * a;
    }
    y.action = action_value(&y, &spec);
    y.residual = 0.0;
    y.converged = true;
    Ok(y)
}

/// Stochastic action of a branch, from its reconstructed saddle field.
pub fn branch_action(branch: &ToyBranch, r: f64, toy: &ToySpec) -> Result<f64> {
    let field = reconstruct(branch, r, toy, 0.0)?;
    Ok(field.action)
}

/// Branch with the smallest action.
pub fn minimal_branch(branches: &[ToyBranch]) -> Option<&ToyBranch> {
    branches.iter().min_by(|a, b| a.action.total_cmp(&b.action))
}
