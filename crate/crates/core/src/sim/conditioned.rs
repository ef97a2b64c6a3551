use nalgebra::DMatrix;
use serde::Serialize;

/// Streaming per-(arm, step) moments of `n_k^t` and `s_k^t / n_k^t` over
/// the episodes whose regret fell in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedStats {
    pub window: (f64, f64),
    count: u64,
    mean_n: DMatrix<f64>,
    m2_n: DMatrix<f64>,
    mean_muhat: DMatrix<f64>,
    m2_muhat: DMatrix<f64>,
}

impl ConditionedStats {
    pub fn new(window: (f64, f64), arms: usize, horizon: usize) -> Self {
        let z = DMatrix::zeros(arms, horizon + 1);
        Self {
            window,
            count: 0,
            mean_n: z.clone(),
            m2_n: z.clone(),
            mean_muhat: z.clone(),
            m2_muhat: z,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.window.0 && r < self.window.1
    }

    /// Number of matched trajectories.
    pub fn matched(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn arms(&self) -> usize {
        self.mean_n.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.mean_n.ncols() - 1
    }

    pub fn n_mean(&self, k: usize, t: usize) -> f64 {
        self.mean_n[(k, t)]
    }

    pub fn n_std(&self, k: usize, t: usize) -> f64 {
        self.std(&self.m2_n, k, t)
    }

    pub fn muhat_mean(&self, k: usize, t: usize) -> f64 {
        self.mean_muhat[(k, t)]
    }

    pub fn muhat_std(&self, k: usize, t: usize) -> f64 {
        self.std(&self.m2_muhat, k, t)
    }

    // Population standard deviation of the matched set.
    fn std(&self, m2: &DMatrix<f64>, k: usize, t: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (m2[(k, t)] / self.count as f64).max(0.0).sqrt()
        }
    }

    /// Welford update with one trajectory stored step-major (`t * K + k`).
    pub(crate) fn push_flat(&mut self, s: &[f64], n: &[u32]) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        let k_arms = self.arms();
        for t in 0..=self.horizon() {
            for k in 0..k_arms {
                let idx = t * k_arms + k;
                let nv = n[idx] as f64;
                let mv = s[idx] / nv;
                welford(&mut self.mean_n[(k, t)], &mut self.m2_n[(k, t)], nv, inv);
                welford(&mut self.mean_muhat[(k, t)], &mut self.m2_muhat[(k, t)], mv, inv);
            }
        }
    }

    pub fn push(&mut self, s: &DMatrix<f64>, n: &DMatrix<f64>) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for t in 0..=self.horizon() {
            for k in 0..self.arms() {
                let nv = n[(k, t)];
                let mv = s[(k, t)] / nv;
                welford(&mut self.mean_n[(k, t)], &mut self.m2_n[(k, t)], nv, inv);
                welford(&mut self.mean_muhat[(k, t)], &mut self.m2_muhat[(k, t)], mv, inv);
            }
        }
    }

    /// Chan et al. pairwise combination of two partial accumulators.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let total = na + nb;
        combine(&mut self.mean_n, &mut self.m2_n, &other.mean_n, &other.m2_n, na, nb, total);
        combine(
            &mut self.mean_muhat,
            &mut self.m2_muhat,
            &other.mean_muhat,
            &other.m2_muhat,
            na,
            nb,
            total,
        );
        self.count += other.count;
    }
}

#[inline]
fn welford(mean: &mut f64, m2: &mut f64, x: f64, inv_count: f64) {
    let delta = x - *mean;
    *mean += delta * inv_count;
    *m2 += delta * (x - *mean);
}

fn combine(
    mean: &mut DMatrix<f64>,
    m2: &mut DMatrix<f64>,
    other_mean: &DMatrix<f64>,
    other_m2: &DMatrix<f64>,
    na: f64,
    nb: f64,
    total: f64,
) {
    for i in 0..mean.len() {
        let delta = other_mean[i] - mean[i];
        mean[i] += delta * nb / total;
        m2[i] += other_m2[i] + delta * delta * na * nb / total;
    }
}
