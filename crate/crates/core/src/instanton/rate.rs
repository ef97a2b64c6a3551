//! Rate function `I(r) = gamma * Phi*(r)` over a grid of regret values.

use super::field::{SaddleField, Variant};
use super::passes::forward_pass;
use super::solve::{merge_unique, solve_saddle, sort_by_action, SolveStrategy, SolverOptions};
use crate::error::{Error, Result};
use crate::policy::BanditSpec;

#[derive(Debug, Clone, Default)]
pub struct RateOptions {
    pub solver: SolverOptions,
    /// Fresh starts used on the outward sweeps. `seeds` is ignored; the
    /// neighbouring grid point supplies those.
    pub strategy: SolveStrategy,
}

#[derive(Debug, Clone)]
pub struct RateCurve {
    pub gamma: f64,
    pub r_grid: Vec<f64>,
    /// Minimal action per grid point, NaN where nothing converged.
    pub action: Vec<f64>,
    pub rate: Vec<f64>,
    pub ir_hat: Vec<f64>,
    pub n_solutions: Vec<usize>,
    pub residual: Vec<f64>,
    pub converged: Vec<bool>,
    pub r_mpv: f64,
    /// Every distinct solution per grid point, ascending by action.
    pub solutions: Vec<Vec<SaddleField>>,
}

impl RateCurve {
    pub fn minimal(&self, i: usize) -> Option<&SaddleField> {
        self.solutions[i].first()
    }

    pub fn converged_fraction(&self) -> f64 {
        let ok = self.converged.iter().filter(|&&c| c).count();
        ok as f64 / self.converged.len() as f64
    }

    /// Numerical uncertainty of each rate value, from the solver residual.
    pub fn noise_floor(&self) -> Vec<f64> {
        self.rate
            .iter()
            .zip(&self.residual)
            .zip(&self.action)
            .map(|((&rate, &res), &action)| {
                1e-9 * (1.0 + rate.abs()) + self.gamma * res.sqrt() * (1.0 + action.abs())
            })
            .collect()
    }

    /// Grid indices of the kinks, see [`detect_kinks`].
    pub fn kinks(&self) -> Vec<usize> {
        detect_kinks(&self.r_grid, &self.rate, &self.noise_floor())
    }
}

/// `(T + K) mu_* - sum_k mu_k n_k^T` along the deterministic policy
/// trajectory. Valid for any `gamma`, including zero.
pub fn most_probable_regret(spec: &BanditSpec) -> Result<f64> {
    let cols = spec.horizon() + 1;
    let zero = nalgebra::DMatrix::zeros(spec.arms(), cols);
    let (n, _) = forward_pass(&zero, &zero, 0.0, spec, Variant::Simplified)?;
    let earned: f64 = (0..spec.arms()).map(|k| spec.mu()[k] * n[(k, cols - 1)]).sum();
    Ok(spec.oracle_reward() - earned)
}

/// Concave kinks of a sampled curve.
///
/// A grid point is concave when the divided second difference lies below
/// `-10` times the propagated `noise`. Consecutive concave points form one
/// kink, reported at its most negative second difference. Points with a
/// non-finite value break runs.
pub fn detect_kinks(r: &[f64], value: &[f64], noise: &[f64]) -> Vec<usize> {
    let mut kinks = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    for i in 1..r.len().saturating_sub(1) {
        let (h1, h2) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        let w = 2.0 / (h1 + h2);
        let d2 = w * ((value[i + 1] - value[i]) / h2 - (value[i] - value[i - 1]) / h1);
        let floor = w * (noise[i + 1] / h2 + noise[i] * (1.0 / h1 + 1.0 / h2) + noise[i - 1] / h1);
        let concave = d2.is_finite() && floor.is_finite() && d2 < -10.0 * floor;
        match (concave, run) {
            (true, Some((_, best))) if d2 >= best => {}
            (true, _) => run = Some((i, d2)),
            (false, Some((at, _))) => {
                kinks.push(at);
                run = None;
            }
            (false, None) => {}
        }
    }
    if let Some((at, _)) = run {
        kinks.push(at);
    }
    kinks
}

/// Minimal-action rate function on `r_grid`.
///
/// Two outward sweeps start at the grid point nearest `r_mpv`; at each point
/// the solutions of the previous point seed the solve together with the
/// structured and random starts of `opts.strategy`. Two inward sweeps then
/// carry every branch back towards `r_mpv` so that branches first met far
/// out are followed down to where they fold.
pub fn rate_curve(spec: &BanditSpec, r_grid: &[f64], opts: &RateOptions) -> Result<RateCurve> {
    if !(spec.gamma() > 0.0) {
        return Err(Error::Domain("rate function needs gamma > 0".into()));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidSpec("regret grid must be non-empty and finite".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("regret grid must be strictly increasing".into()));
    }
    let r_mpv = most_probable_regret(spec)?;
    let len = r_grid.len();
    let start = (0..len)
        .min_by(|&a, &b| (r_grid[a] - r_mpv).abs().total_cmp(&(r_grid[b] - r_mpv).abs()))
        .unwrap_or(0);

    let mut per_r: Vec<Vec<SaddleField>> = vec![Vec::new(); len];
    let fresh = SolveStrategy {
        seeds: Vec::new(),
        ..opts.strategy.clone()
    };
    let carry_only = SolveStrategy {
        multistarts: 0,
        structured: false,
        seeds: Vec::new(),
        ..opts.strategy.clone()
    };

    let up: Vec<usize> = (start..len).collect();
    let down: Vec<usize> = (0..=start).rev().collect();
    let sweeps: [(Vec<usize>, &SolveStrategy); 4] = [
        (up.clone(), &fresh),
        (down.clone(), &fresh),
        (up.into_iter().rev().collect(), &carry_only),
        (down.into_iter().rev().collect(), &carry_only),
    ];
    for (order, strategy) in sweeps {
        let mut carried: Vec<SaddleField> = Vec::new();
        for i in order {
            let r = r_grid[i];
            let mut strat = strategy.clone();
            strat.seeds = carried
                .iter()
                .filter(|c| !per_r[i].iter().any(|f| f.distance(c) < opts.solver.dedup_tol))
                .cloned()
                .collect();
            if !strat.structured && strat.multistarts == 0 && strat.seeds.is_empty() {
                carried = per_r[i].clone();
                continue;
            }
            for field in solve_saddle(spec, r, &strat, &opts.solver)? {
                merge_unique(&mut per_r[i], field, opts.solver.dedup_tol);
            }
            sort_by_action(&mut per_r[i]);
            log::debug!("r = {r}: {} solutions", per_r[i].len());
            carried = per_r[i].clone();
        }
    }

    let gamma = spec.gamma();
    let mut curve = RateCurve {
        gamma,
        r_grid: r_grid.to_vec(),
        action: Vec::with_capacity(len),
        rate: Vec::with_capacity(len),
        ir_hat: Vec::with_capacity(len),
        n_solutions: Vec::with_capacity(len),
        residual: Vec::with_capacity(len),
        converged: Vec::with_capacity(len),
        r_mpv,
        solutions: per_r,
    };
    for (i, found) in curve.solutions.iter().enumerate() {
        curve.n_solutions.push(found.len());
        match found.first() {
            Some(best) => {
                curve.action.push(best.action);
                curve.rate.push(gamma * best.action);
                curve.ir_hat.push(best.ir_hat);
                curve.residual.push(best.residual);
                curve.converged.push(true);
            }
            None => {
                log::warn!("no converged saddle point at r = {}", r_grid[i]);
                curve.action.push(f64::NAN);
                curve.rate.push(f64::NAN);
                curve.ir_hat.push(f64::NAN);
                curve.residual.push(f64::INFINITY);
                curve.converged.push(false);
            }
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_limit_regret() {
        let spec = BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.36, 1e4, 0.0).unwrap();
        assert!((most_probable_regret(&spec).unwrap() - 3.0).abs() < 1e-12);
        let noiseless = spec.with_gamma(0.0).unwrap();
        assert_eq!(most_probable_regret(&noiseless).unwrap(), most_probable_regret(&spec).unwrap());
    }

    #[test]
    fn two_step_regret() {
        let spec = BanditSpec::new(vec![1.0, 2.0], vec![1.0; 2], 1, 0.16, 10.0, 0.4).unwrap();
        let s10 = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((most_probable_regret(&spec).unwrap() - (2.0 - s10)).abs() < 1e-14);
    }

    #[test]
    fn kinks_of_piecewise_curves() {
        let r: Vec<f64> = (0..41).map(|i| i as f64 * 0.5).collect();
        let noise = vec![1e-12; r.len()];
        let convex: Vec<f64> = r.iter().map(|x| (x - 7.0) * (x - 7.0)).collect();
        assert!(detect_kinks(&r, &convex, &noise).is_empty());
        // minimum of three parabolas: two concave corners
        let pieces: Vec<f64> = r
            .iter()
            .map(|x| {
                let a = (x - 3.0).powi(2);
                let b = 0.5 * (x - 9.0).powi(2) + 6.0;
                let c = 0.3 * (x - 16.0).powi(2) + 12.0;
                a.min(b).min(c)
            })
            .collect();
        assert_eq!(detect_kinks(&r, &pieces, &noise).len(), 2);
        let mut broken = pieces.clone();
        broken[20] = f64::NAN;
        assert!(detect_kinks(&r, &broken, &noise).len() <= 3);
    }

    #[test]
    fn noise_masks_small_wiggles() {
        let r: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let wiggly: Vec<f64> = r.iter().enumerate().map(|(i, x)| x * x + if i % 2 == 0 { 1e-7 } else { 0.0 }).collect();
        let loud = vec![1e-6; r.len()];
        assert!(detect_kinks(&r, &wiggly, &loud).is_empty());
    }

    #[test]
    fn grid_validation() {
        let spec = BanditSpec::new(vec![1.0, 2.0], vec![1.0; 2], 1, 0.16, 10.0, 0.4).unwrap();
        let opts = RateOptions::default();
        assert!(rate_curve(&spec, &[], &opts).is_err());
        assert!(rate_curve(&spec, &[1.0, 0.5], &opts).is_err());
        assert!(rate_curve(&spec.with_gamma(0.0).unwrap(), &[1.0], &opts).is_err());
    }

    #[test]
    fn single_point_at_most_probable_regret() {
        let spec = BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.36, 10.0, 0.4).unwrap();
        let r = most_probable_regret(&spec).unwrap();
        let curve = rate_curve(&spec, &[r], &RateOptions::default()).unwrap();
        assert_eq!(curve.rate[0], 0.0);
        assert!(curve.converged[0]);
    }
}
