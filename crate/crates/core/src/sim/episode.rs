use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::policy::BanditSpec;

/// One realized episode: warm-up pull of every arm, then `T` policy pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Arm pulled at steps `1..=T` (entry `t - 1` is `a^t`).
    pub actions: Vec<usize>,
    /// Warm-up rewards `x_k^0`.
    pub warmup_rewards: Vec<f64>,
    /// Reward collected at steps `1..=T` from the arm that was pulled.
    pub rewards: Vec<f64>,
    /// Pull counts, `K x (T + 1)`.
    pub n: DMatrix<f64>,
    /// Reward sums, `K x (T + 1)`.
    pub s: DMatrix<f64>,
    pub regret: f64,
    pub total_reward: f64,
}

impl Trajectory {
    /// Empirical mean `s_k^t / n_k^t`.
    pub fn mean_reward(&self, k: usize, t: usize) -> f64 {
        self.s[(k, t)] / self.n[(k, t)]
    }
}

/// Allocation-free episode runner reused across many episodes.
///
/// Keeps `(s, n)` for every step in flat `t * K + k` buffers so that
/// conditioned statistics can be accumulated after the regret is known.
pub(crate) struct Simulator<'a> {
    spec: &'a BanditSpec,
    sd: Vec<f64>,
    bonus: Vec<f64>,
    inv_sqrt: Vec<f64>,
    weights: Vec<f64>,
    pub(crate) s: Vec<f64>,
    pub(crate) n: Vec<u32>,
    record: bool,
}

impl<'a> Simulator<'a> {
    pub(crate) fn new(spec: &'a BanditSpec, record: bool) -> Self {
        let k = spec.arms();
        let t_max = spec.horizon();
        let sd = (0..k).map(|a| spec.variance(a).sqrt()).collect();
        let bonus = (0..t_max).map(|t| spec.bonus_scale(t)).collect();
        let inv_sqrt = (0..=spec.total_pulls()).map(|m| 1.0 / (m as f64).sqrt()).collect();
        let steps = if record { t_max + 1 } else { 1 };
        Self {
            spec,
            sd,
            bonus,
            inv_sqrt,
            weights: vec![0.0; k],
            s: vec![0.0; steps * k],
            n: vec![0; steps * k],
            record,
        }
    }

    /// Runs one episode, returning the regret. When recording, `actions` and
    /// `rewards` receive one entry per policy step.
    pub(crate) fn run<R: Rng>(
        &mut self,
        rng: &mut R,
        mut actions: Option<&mut Vec<usize>>,
        mut rewards: Option<&mut Vec<f64>>,
    ) -> f64 {
        let spec = self.spec;
        let k = spec.arms();
        let beta = spec.beta();
        let mu = spec.mu();

        for a in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            self.s[a] = mu[a] + self.sd[a] * z;
            self.n[a] = 1;
        }

        for t in 0..spec.horizon() {
            let (cur, next) = if self.record {
                (t * k, (t + 1) * k)
            } else {
                (0, 0)
            };
            let bonus = self.bonus[t];
            let mut max = f64::NEG_INFINITY;
            for a in 0..k {
                let n = self.n[cur + a];
                let v = beta * (self.s[cur + a] / n as f64 + bonus * self.inv_sqrt[n as usize]);
                self.weights[a] = v;
                max = max.max(v);
            }
            let mut total = 0.0;
            for w in self.weights.iter_mut() {
                *w = (*w - max).exp();
                total += *w;
            }
            let u: f64 = rng.random();
            let target = u * total;
            let mut acc = 0.0;
            let mut chosen = k - 1;
            for (a, w) in self.weights.iter().enumerate() {
                acc += w;
                if target < acc {
                    chosen = a;
                    break;
                }
            }
            let z: f64 = rng.sample(StandardNormal);
            let x = mu[chosen] + self.sd[chosen] * z;

            if self.record {
                self.s.copy_within(cur..cur + k, next);
                self.n.copy_within(cur..cur + k, next);
            }
            self.s[next + chosen] += x;
            self.n[next + chosen] += 1;

            if let Some(acts) = actions.as_deref_mut() {
                acts.push(chosen);
            }
            if let Some(rs) = rewards.as_deref_mut() {
                rs.push(x);
            }
        }

        let last = if self.record { spec.horizon() * k } else { 0 };
        let total: f64 = self.s[last..last + k].iter().sum();
        spec.oracle_reward() - total
    }
}

/// Simulates one episode of the softmax-UCB bandit with the given stream.
pub fn run_episode<R: Rng>(spec: &BanditSpec, rng: &mut R) -> Trajectory {
    let k = spec.arms();
    let steps = spec.horizon() + 1;
    let mut sim = Simulator::new(spec, true);
    let mut actions = Vec::with_capacity(spec.horizon());
    let mut rewards = Vec::with_capacity(spec.horizon());
    let regret = sim.run(rng, Some(&mut actions), Some(&mut rewards));
    let n = DMatrix::from_fn(k, steps, |a, t| sim.n[t * k + a] as f64);
    let s = DMatrix::from_fn(k, steps, |a, t| sim.s[t * k + a]);
    let warmup_rewards = (0..k).map(|a| sim.s[a]).collect();
    let last = spec.horizon() * k;
    let total_reward: f64 = sim.s[last..last + k].iter().sum();
    Trajectory {
        actions,
        warmup_rewards,
        rewards,
        n,
        s,
        regret,
        total_reward,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{softmax, ucb_index};
    use crate::sim::rng::episode_stream;
    use proptest::prelude::*;

    /// Noiseless, zero-temperature reference: pull the arm with the largest
    /// UCB index, first index on ties.
    fn greedy_recursion(spec: &BanditSpec) -> (Vec<f64>, f64) {
        let k = spec.arms();
        let mut s = spec.mu().to_vec();
        let mut n = vec![1.0; k];
        for t in 0..spec.horizon() {
            let b: Vec<f64> = (0..k).map(|a| ucb_index(s[a], n[a], t, spec).unwrap()).collect();
            let best = (0..k).fold(0, |i, a| if b[a] > b[i] { a } else { i });
            s[best] += spec.mu()[best];
            n[best] += 1.0;
        }
        (n, spec.oracle_reward() - s.iter().sum::<f64>())
    }

    #[test]
    fn noiseless_greedy_matches_recursion() {
        for &c in &[0.0, 0.4, 1.0, 2.0] {
            let spec = BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.0, 1e6, c).unwrap();
            let (n_ref, r_ref) = greedy_recursion(&spec);
            for seed in 0..5 {
                let tr = run_episode(&spec, &mut episode_stream(seed, seed * 31));
                for a in 0..3 {
                    assert_eq!(tr.n[(a, 20)], n_ref[a], "c={c} arm {a}");
                }
                assert!((tr.regret - r_ref).abs() < 1e-12, "c={c}");
            }
        }
        let spec = BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, 0.0, 1e6, 0.4).unwrap();
        assert_eq!(greedy_recursion(&spec).1, 3.0);
    }

    #[test]
    fn two_outcome_noiseless_system() {
        // Regret is 1 if the better arm is pulled at t = 1, otherwise 2.
        let spec = BanditSpec::new(vec![1.0, 2.0], vec![1.0; 2], 1, 0.0, 10.0, 0.4).unwrap();
        let p_good = softmax(&[10.0, 20.0])[1];
        assert!((p_good - 0.999_954_602_131_297_6).abs() < 1e-15);
        let trials = 400_000u64;
        let mut good = 0u64;
        for i in 0..trials {
            let tr = run_episode(&spec, &mut episode_stream(11, i));
            if tr.regret == 1.0 {
                good += 1;
            } else {
                assert_eq!(tr.regret, 2.0);
            }
        }
        let p_hat = good as f64 / trials as f64;
        let se = (p_good * (1.0 - p_good) / trials as f64).sqrt();
        assert!((p_hat - p_good).abs() < 5.0 * se + 1e-6, "{p_hat} vs {p_good}");
    }

    #[test]
    fn single_arm_regret_is_gaussian() {
        let gamma = 0.25;
        let t = 9;
        let spec = BanditSpec::single_arm(1.5, 2.0, t, gamma).unwrap();
        let trials = 1_000_000u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut sim = Simulator::new(&spec, false);
        for i in 0..trials {
            let r = sim.run(&mut episode_stream(5, i), None, None);
            sum += r;
            sum2 += r * r;
        }
        let m = trials as f64;
        let mean = sum / m;
        let var = sum2 / m - mean * mean;
        let true_var = (t + 1) as f64 * gamma * 4.0;
        let se_mean = (true_var / m).sqrt();
        let se_var = true_var * (2.0 / m).sqrt();
        assert!(mean.abs() < 5.0 * se_mean, "mean {mean}");
        assert!((var - true_var).abs() < 5.0 * se_var, "var {var} vs {true_var}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn trajectory_invariants(
            seed in any::<u64>(),
            idx in any::<u64>(),
            gamma in 0.0f64..2.0,
            beta in 0.0f64..50.0,
            c in 0.0f64..1.5,
            horizon in 1usize..30,
        ) {
            let spec = BanditSpec::new(vec![0.5, 2.0, 1.0], vec![1.0, 0.5, 2.0], horizon, gamma, beta, c).unwrap();
            let tr = run_episode(&spec, &mut episode_stream(seed, idx));
            prop_assert_eq!(tr.actions.len(), horizon);
            for a in 0..3 {
                prop_assert_eq!(tr.n[(a, 0)], 1.0);
                prop_assert_eq!(tr.s[(a, 0)], tr.warmup_rewards[a]);
            }
            for t in 0..=horizon {
                let pulls: f64 = tr.n.column(t).sum();
                prop_assert_eq!(pulls, (3 + t) as f64);
                if t > 0 {
                    let inc: Vec<f64> = (0..3).map(|a| tr.n[(a, t)] - tr.n[(a, t - 1)]).collect();
                    prop_assert_eq!(inc.iter().filter(|&&d| d == 1.0).count(), 1);
                    prop_assert!(inc.iter().all(|&d| d == 0.0 || d == 1.0));
                    prop_assert_eq!(inc[tr.actions[t - 1]], 1.0);
                }
            }
            prop_assert_eq!(tr.regret, spec.oracle_reward() - tr.total_reward);
            let slack = 4.0 * f64::EPSILON * spec.oracle_reward().abs().max(tr.total_reward.abs());
            prop_assert!((tr.regret + tr.total_reward - spec.oracle_reward()).abs() <= slack);
        }
    }
}
