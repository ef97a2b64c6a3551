use rayon::prelude::*;
use serde::Serialize;

use super::conditioned::ConditionedStats;
use super::episode::Simulator;
use super::histogram::RegretHistogram;
use super::rng::SubstreamFactory;
use crate::error::{Error, Result};
use crate::policy::BanditSpec;

/// Episodes per work unit. Fixed so that the reduction order does not depend
/// on the worker count.
const CHUNK: u64 = 1 << 14;
/// Work units reduced per parallel round; bounds memory for huge runs.
const ROUND: u64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub bin_width: f64,
    pub origin: f64,
    pub windows: Vec<(f64, f64)>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            master_seed: 0,
            bin_width: 0.5,
            origin: 0.0,
            windows: Vec::new(),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub histogram: RegretHistogram,
    /// One entry per requested window, in request order. Windows that no
    /// trajectory reached are returned with `is_empty() == true`.
    pub conditioned: Vec<ConditionedStats>,
}

struct Partial {
    hist: RegretHistogram,
    stats: Vec<ConditionedStats>,
}

fn run_chunk(
    spec: &BanditSpec,
    streams: &SubstreamFactory,
    template: &Partial,
    range: std::ops::Range<u64>,
) -> Partial {
    let mut out = Partial {
        hist: template.hist.clone(),
        stats: template.stats.clone(),
    };
    let record = !out.stats.is_empty();
    let mut sim = Simulator::new(spec, record);
    for episode in range {
        let mut rng = streams.episode(episode);
        let r = sim.run(&mut rng, None, None);
        out.hist.record(r);
        for st in out.stats.iter_mut() {
            if st.contains(r) {
                st.push_flat(&sim.s, &sim.n);
            }
        }
    }
    out
}

fn reduce(spec: &BanditSpec, config: &EnsembleConfig) -> Result<Partial> {
    let streams = SubstreamFactory::new(config.master_seed);
    let mut acc = Partial {
        hist: RegretHistogram::new(config.bin_width, config.origin)?,
        stats: config
            .windows
            .iter()
            .map(|&w| ConditionedStats::new(w, spec.arms(), spec.horizon()))
            .collect(),
    };
    let template = Partial {
        hist: acc.hist.clone(),
        stats: acc.stats.clone(),
    };
    let chunks = config.trials.div_ceil(CHUNK);
    let mut start = 0;
    while start < chunks {
        let end = (start + ROUND).min(chunks);
        let partials: Vec<Partial> = (start..end)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(config.trials);
                run_chunk(spec, &streams, &template, lo..hi)
            })
            .collect();
        for p in &partials {
            acc.hist.merge(&p.hist)?;
            for (a, b) in acc.stats.iter_mut().zip(&p.stats) {
                a.merge(b);
            }
        }
        start = end;
    }
    Ok(acc)
}

/// Simulates `trials` independent episodes and reduces them into a regret
/// histogram plus conditioned trajectory statistics for each window.
///
/// The output depends only on `(spec, trials, master_seed, binning,
/// windows)`; the worker count never changes a bit of it.
pub fn run_ensemble(spec: &BanditSpec, config: &EnsembleConfig) -> Result<EnsembleResult> {
    if config.trials == 0 {
        return Err(Error::InvalidSpec("trials must be at least 1".into()));
    }
    for &(lo, hi) in &config.windows {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidSpec(format!("empty regret window [{lo}, {hi})")));
        }
    }
    let partial = match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
            pool.install(|| reduce(spec, config))?
        }
        None => reduce(spec, config)?,
    };
    for st in partial.stats.iter().filter(|s| s.is_empty()) {
        log::warn!(
            "no trajectory landed in regret window [{}, {})",
            st.window.0,
            st.window.1
        );
    }
    Ok(EnsembleResult {
        histogram: partial.hist,
        conditioned: partial.stats,
    })
}

/// Statistics of the trajectories whose regret lies in `window`.
pub fn conditioned_trajectory_stats(
    spec: &BanditSpec,
    trials: u64,
    master_seed: u64,
    window: (f64, f64),
) -> Result<ConditionedStats> {
    let config = EnsembleConfig {
        trials,
        master_seed,
        windows: vec![window],
        ..EnsembleConfig::default()
    };
    let mut res = run_ensemble(spec, &config)?;
    Ok(res.conditioned.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::episode::run_episode;
    use crate::sim::rng::episode_stream;

    fn reference_spec(gamma: f64) -> BanditSpec {
        BanditSpec::new(vec![1.0, 2.0, 3.0], vec![1.0; 3], 20, gamma, 10.0, 0.4).unwrap()
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = reference_spec(0.36);
        let base = EnsembleConfig {
            trials: 3 * CHUNK + 123,
            master_seed: 99,
            windows: vec![(-1.0, 2.0), (6.0, 6.5)],
            ..EnsembleConfig::default()
        };
        let one = run_ensemble(&spec, &EnsembleConfig { workers: Some(1), ..base.clone() }).unwrap();
        let many = run_ensemble(&spec, &EnsembleConfig { workers: Some(8), ..base.clone() }).unwrap();
        assert_eq!(one, many);
        let again = run_ensemble(&spec, &EnsembleConfig { workers: Some(3), ..base }).unwrap();
        assert_eq!(one, again);
    }

    #[test]
    fn single_trial_ensemble() {
        let spec = reference_spec(0.04);
        let cfg = EnsembleConfig {
            trials: 1,
            ..EnsembleConfig::default()
        };
        let res = run_ensemble(&spec, &cfg).unwrap();
        assert_eq!(res.histogram.trials(), 1);
        assert_eq!(res.histogram.counts().values().sum::<u64>(), 1);
        let zero = EnsembleConfig { trials: 0, ..cfg };
        assert!(run_ensemble(&spec, &zero).is_err());
    }

    #[test]
    fn matches_sequential_episodes() {
        let spec = reference_spec(0.36);
        let trials = 5000u64;
        let window = (f64::NEG_INFINITY, f64::INFINITY);
        let cfg = EnsembleConfig {
            trials,
            master_seed: 3,
            windows: vec![window, (1.0, 4.0)],
            ..EnsembleConfig::default()
        };
        let res = run_ensemble(&spec, &cfg).unwrap();
        let mut hist = RegretHistogram::new(0.5, 0.0).unwrap();
        let mut all = ConditionedStats::new(window, 3, 20);
        let mut sub = ConditionedStats::new((1.0, 4.0), 3, 20);
        for i in 0..trials {
            let tr = run_episode(&spec, &mut episode_stream(3, i));
            hist.record(tr.regret);
            all.push(&tr.s, &tr.n);
            if sub.contains(tr.regret) {
                sub.push(&tr.s, &tr.n);
            }
        }
        assert_eq!(res.histogram, hist);
        assert_eq!(res.conditioned[0].matched(), trials);
        assert_eq!(res.conditioned[1].matched(), sub.matched());
        for k in 0..3 {
            for t in 0..=20 {
                assert!((res.conditioned[0].n_mean(k, t) - all.n_mean(k, t)).abs() < 1e-9);
                assert!((res.conditioned[0].muhat_mean(k, t) - all.muhat_mean(k, t)).abs() < 1e-9);
                assert!((res.conditioned[1].muhat_std(k, t) - sub.muhat_std(k, t)).abs() < 1e-9);
            }
        }
        for t in 0..=20 {
            let total: f64 = (0..3).map(|k| res.conditioned[0].n_mean(k, t)).sum();
            assert!((total - (3 + t) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn unreachable_window_is_flagged_empty() {
        let spec = reference_spec(0.36);
        let st = conditioned_trajectory_stats(&spec, 2000, 1, (1000.0, 1000.5)).unwrap();
        assert!(st.is_empty());
        assert!(conditioned_trajectory_stats(&spec, 10, 1, (2.0, 2.0)).is_err());
    }
}
