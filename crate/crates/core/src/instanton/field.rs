use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::policy::BanditSpec;

/// Which form of the saddle-point equations to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Arm choice driven by the exact tilted softmax `rho(beta B + sum in_hat)`.
    Full,
    /// Large-beta form: the tilt enters only through the softmax Jacobian.
    #[default]
    Simplified,
}

/// All order parameters of one saddle point.
///
/// `is_hat` and `in_hat` hold the real numbers `i * s_hat` and `i * n_hat`
/// (the conjugate fields are purely imaginary at the saddle), and `ir_hat`
/// likewise holds `i * r_hat`. Every matrix is `K x (T + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleField {
    pub s: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub is_hat: DMatrix<f64>,
    pub in_hat: DMatrix<f64>,
    pub ir_hat: f64,
    pub action: f64,
    pub residual: f64,
    pub converged: bool,
    pub variant: Variant,
    /// Target regret the field was solved for.
    pub regret: f64,
}

impl SaddleField {
    /// All conjugates zero; `s` and `n` left at the warm-up values.
    pub fn zeros(spec: &BanditSpec, variant: Variant) -> Self {
        let k = spec.arms();
        let cols = spec.horizon() + 1;
        let z = DMatrix::zeros(k, cols);
        Self {
            s: DMatrix::from_fn(k, cols, |a, _| spec.mu()[a]),
            n: DMatrix::from_element(k, cols, 1.0),
            is_hat: z.clone(),
            in_hat: z,
            ir_hat: 0.0,
            action: 0.0,
            residual: f64::INFINITY,
            converged: false,
            variant,
            regret: f64::NAN,
        }
    }

    pub fn arms(&self) -> usize {
        self.s.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.s.ncols() - 1
    }

    /// Number of unknowns excluding `ir_hat`: `4 K (T + 1)`.
    pub fn field_len(&self) -> usize {
        4 * self.s.len()
    }

    /// `[s, n, is_hat, in_hat]`, each flattened column-major (arm fastest).
    pub fn pack(&self) -> DVector<f64> {
        let m = self.s.len();
        let mut v = DVector::zeros(4 * m);
        for (block, src) in [&self.s, &self.n, &self.is_hat, &self.in_hat].into_iter().enumerate() {
            v.rows_mut(block * m, m).copy_from_slice(src.as_slice());
        }
        v
    }

    /// Inverse of [`SaddleField::pack`]; metadata fields are kept.
    pub fn unpack_into(&mut self, v: &[f64]) {
        let m = self.s.len();
        self.s.copy_from_slice(&v[..m]);
        self.n.copy_from_slice(&v[m..2 * m]);
        self.is_hat.copy_from_slice(&v[2 * m..3 * m]);
        self.in_hat.copy_from_slice(&v[3 * m..4 * m]);
    }

    /// Empirical mean `s / n` of arm `k` at step `t`.
    pub fn mean_reward(&self, k: usize, t: usize) -> f64 {
        self.s[(k, t)] / self.n[(k, t)]
    }

    /// Total reward `sum_k s_k^T`.
    pub fn total_reward(&self) -> f64 {
        self.s.column(self.horizon()).iter().sum()
    }

    /// Regret implied by the current `s`.
    pub fn implied_regret(&self, spec: &BanditSpec) -> f64 {
        spec.oracle_reward() - self.total_reward()
    }

    /// `s_2^0 - s_1^0`, the coordinate used to label two-arm branches.
    pub fn warmup_gap(&self) -> f64 {
        self.s[(1, 0)] - self.s[(0, 0)]
    }

    /// Largest elementwise difference, relative to `max(1, |a|, |b|)`, over
    /// all four fields and `ir_hat`.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.pack();
        let b = other.pack();
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1.0);
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| rel(x, y))
            .fold(rel(self.ir_hat, other.ir_hat), f64::max)
    }
}

/// Stochastic action at a saddle point,
/// `1/2 sum_k sigma_k^2 sum_{t,t'} is_k^t is_k^t' n_k^min(t,t')`.
pub fn action_value(y: &SaddleField, spec: &BanditSpec) -> f64 {
    let cols = y.horizon() + 1;
    let mut total = 0.0;
    for k in 0..y.arms() {
        // sum_{t,t'} a_t a_t' n_min(t,t') = sum_t n_t a_t (a_t + 2 sum_{t'>t} a_t')
        let mut tail = 0.0;
        let mut arm = 0.0;
        for t in (0..cols).rev() {
            let a = y.is_hat[(k, t)];
            arm += y.n[(k, t)] * a * (a + 2.0 * tail);
            tail += a;
        }
        total += spec.variance(k) * arm;
    }
    0.5 * total
}
