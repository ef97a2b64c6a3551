//! Multistart search for all saddle points at one regret value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::field::{action_value, SaddleField, Variant};
use super::iterate::{apply_map, fixed_point_iterate, FixedPointOptions};
use super::newton::{newton_refine, NewtonOptions};
use crate::error::{Error, Result};
use crate::policy::BanditSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub variant: Variant,
    pub fixed_point: FixedPointOptions,
    pub newton: NewtonOptions,
    /// Two solutions are the same if [`SaddleField::distance`] is below this.
    pub dedup_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            variant: Variant::Simplified,
            fixed_point: FixedPointOptions {
                max_iter: 300,
                ..FixedPointOptions::default()
            },
            newton: NewtonOptions::default(),
            dedup_tol: 1e-6,
        }
    }
}

/// Where the starting points for one solve come from.
#[derive(Debug, Clone)]
pub struct SolveStrategy {
    /// Random starts with conjugates uniform in `[-2/gamma, 2/gamma]`.
    pub multistarts: usize,
    pub rng_seed: u64,
    /// Warm-up deviation starts: for each arm `j` and margin `m`, every arm
    /// whose mean exceeds `mu_j - m` has its first reward pushed down to
    /// `mu_j - m`. A positive margin puts `j` in the lead after the warm-up;
    /// a negative one leaves it trailing by at most `|m|`. These starts, and
    /// the noiseless trajectory, are tilted towards the target regret with
    /// [`tilt_toward`].
    pub structured: bool,
    pub margins: Vec<f64>,
    /// More margins, in units of the softmax width `1 / beta`.
    pub soft_margins: Vec<f64>,
    /// Extra starts, typically converged solutions at a nearby regret.
    pub seeds: Vec<SaddleField>,
    /// Second round started from blends of every pair among the
    /// `bridge_limit` lowest-action solutions of the first. Unstable branches
    /// sit between stable ones and are rarely reached otherwise.
    pub bridges: bool,
    pub bridge_limit: usize,
}

impl Default for SolveStrategy {
    fn default() -> Self {
        Self {
            multistarts: 8,
            rng_seed: 0x5eed,
            structured: true,
            margins: vec![-0.5, 0.0, 0.25, 0.5, 0.75, 1.5],
            soft_margins: vec![-3.0, -2.0, -1.0, 0.5, 1.0, 2.0],
            seeds: Vec::new(),
            bridges: true,
            bridge_limit: 6,
        }
    }
}

/// Deterministic trajectory of the policy, all conjugates zero.
pub fn noiseless_field(spec: &BanditSpec, variant: Variant) -> Result<SaddleField> {
    apply_map(&SaddleField::zeros(spec, variant), 0.0, spec)
}

/// Start in which no arm's warm-up reward exceeds `mu[winner] - margin`.
pub fn warmup_seed(spec: &BanditSpec, variant: Variant, winner: usize, margin: f64) -> Result<SaddleField> {
    let mut y = SaddleField::zeros(spec, variant);
    let top = spec.mu()[winner];
    for k in 0..spec.arms() {
        let var = spec.variance(k);
        if k != winner && var > 0.0 && spec.mu()[k] > top - margin {
            y.is_hat[(k, 0)] = (top - margin - spec.mu()[k]) / var;
        }
    }
    let mut seeded = apply_map(&y, 0.0, spec)?;
    seeded.is_hat = y.is_hat;
    Ok(seeded)
}

/// Adds a terminal reward tilt sized to first order so that `seed` meets the
/// regret constraint at `r`: lowering `s_k^T` through `is_hat^T = -ir_hat`
/// removes `gamma ir_hat sum_k sigma_k^2 (n_k^T)^2` of reward.
pub fn tilt_toward(seed: &SaddleField, spec: &BanditSpec, r: f64) -> Result<SaddleField> {
    let t = spec.horizon();
    let weight: f64 = (0..spec.arms())
        .map(|k| spec.variance(k) * seed.n[(k, t)] * seed.n[(k, t)])
        .sum();
    if !(weight > 0.0) {
        return Ok(seed.clone());
    }
    let ir_hat = (r - seed.implied_regret(spec)) / weight;
    let mut y = seed.clone();
    for k in 0..spec.arms() {
        y.is_hat[(k, t)] = -ir_hat;
    }
    let mut out = apply_map(&y, ir_hat, spec)?;
    out.is_hat = y.is_hat;
    Ok(out)
}

fn random_seed(spec: &BanditSpec, variant: Variant, rng: &mut ChaCha8Rng) -> SaddleField {
    let scale = 2.0 / spec.gamma();
    let mut y = SaddleField::zeros(spec, variant);
    for v in y.is_hat.iter_mut().chain(y.in_hat.iter_mut()) {
        *v = rng.random_range(-scale..=scale);
    }
    y.ir_hat = rng.random_range(-scale..=scale);
    match apply_map(&y, y.ir_hat, spec) {
        Ok(image) => SaddleField {
            is_hat: y.is_hat,
            in_hat: y.in_hat,
            ..image
        },
        Err(_) => y,
    }
}

/// Newton from `y0`; if that fails, damped iteration first and Newton again.
pub fn refine(y0: &SaddleField, spec: &BanditSpec, r: f64, opts: &SolverOptions) -> Option<SaddleField> {
    let mut y0 = y0.clone();
    y0.variant = opts.variant;
    let direct = newton_refine(&y0, spec, r, &opts.newton).ok()?;
    let field = if direct.field.converged {
        direct.field
    } else {
        let fp = fixed_point_iterate(&y0, spec, r, &opts.fixed_point).ok()?;
        newton_refine(&fp, spec, r, &opts.newton).ok()?.field
    };
    if !field.converged {
        return None;
    }
    let mut field = field;
    field.action = action_value(&field, spec);
    Some(field)
}

/// `(1 - w) a + w b` in every component.
pub fn blend(a: &SaddleField, b: &SaddleField, w: f64) -> SaddleField {
    let packed = a.pack() * (1.0 - w) + b.pack() * w;
    let mut out = a.clone();
    out.unpack_into(packed.as_slice());
    out.ir_hat = (1.0 - w) * a.ir_hat + w * b.ir_hat;
    out.converged = false;
    out
}

/// Adds `candidate` unless an equivalent solution is already present.
pub fn merge_unique(found: &mut Vec<SaddleField>, candidate: SaddleField, tol: f64) -> bool {
    if found.iter().any(|f| f.distance(&candidate) < tol) {
        return false;
    }
    found.push(candidate);
    true
}

/// All starting points the strategy describes, in a fixed order.
pub fn starting_points(spec: &BanditSpec, r: f64, strategy: &SolveStrategy, variant: Variant) -> Result<Vec<SaddleField>> {
    let mut starts = strategy.seeds.clone();
    if strategy.structured {
        let noiseless = noiseless_field(spec, variant)?;
        starts.push(tilt_toward(&noiseless, spec, r)?);
        starts.push(noiseless);
        let mut margins = strategy.margins.clone();
        if spec.beta() > 0.0 {
            margins.extend(strategy.soft_margins.iter().map(|m| m / spec.beta()));
        }
        for winner in 0..spec.arms() {
            for &m in &margins {
                starts.push(tilt_toward(&warmup_seed(spec, variant, winner, m)?, spec, r)?);
            }
        }
    }
    if strategy.multistarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(strategy.rng_seed);
        rng.set_stream(r.to_bits());
        for _ in 0..strategy.multistarts {
            starts.push(random_seed(spec, variant, &mut rng));
        }
    }
    Ok(starts)
}

/// Distinct converged saddle points at regret `r`, ascending by action.
///
/// An empty list means nothing converged.
pub fn solve_saddle(
    spec: &BanditSpec,
    r: f64,
    strategy: &SolveStrategy,
    opts: &SolverOptions,
) -> Result<Vec<SaddleField>> {
    if !(spec.gamma() > 0.0) {
        return Err(Error::Domain(
            "saddle points need gamma > 0; use most_probable_regret for the noiseless point".into(),
        ));
    }
    if !r.is_finite() {
        return Err(Error::Domain(format!("regret must be finite, got {r}")));
    }
    let starts = starting_points(spec, r, strategy, opts.variant)?;
    let solved: Vec<Option<SaddleField>> = starts.par_iter().map(|y| refine(y, spec, r, opts)).collect();
    let mut found = Vec::new();
    for field in solved.into_iter().flatten() {
        merge_unique(&mut found, field, opts.dedup_tol);
    }
    if strategy.bridges && found.len() >= 2 {
        sort_by_action(&mut found);
        let ends = found.len().min(strategy.bridge_limit);
        let mut mids = Vec::new();
        for i in 0..ends {
            for j in i + 1..ends {
                for w in [0.25, 0.5, 0.75] {
                    mids.push(blend(&found[i], &found[j], w));
                }
            }
        }
        let solved: Vec<Option<SaddleField>> = mids.par_iter().map(|y| refine(y, spec, r, opts)).collect();
        for field in solved.into_iter().flatten() {
            merge_unique(&mut found, field, opts.dedup_tol);
        }
    }
    sort_by_action(&mut found);
    Ok(found)
}

pub(crate) fn sort_by_action(found: &mut [SaddleField]) {
    found.sort_by(|a, b| a.action.total_cmp(&b.action));
}
