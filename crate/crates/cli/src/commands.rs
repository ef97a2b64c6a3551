//! The five experiment commands. Each validates its inputs, creates its
//! output files, computes, writes CSV rows and a `metadata.json`.

use std::path::PathBuf;
use std::time::Instant;

use banditpath::instanton::{detect_kinks, RateCurve};
use banditpath::sim::EnsembleResult;
use banditpath::toy::ToyBranch;
use banditpath::{
    critical_regret, empirical_action, find_branches, most_probable_regret, rate_curve, run_ensemble,
    BanditSpec, ConditionedStats, EnsembleConfig, RateOptions, SaddleField, SolveStrategy, SolverOptions,
    ToySpec,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, RateConfig};
use crate::error::CliError;
use crate::output::{num, Metadata, Outputs};

pub const HISTOGRAM_HEADER: [&str; 4] = ["r", "count", "phi_sim", "gamma_phi_sim"];
pub const TRAJECTORY_SIM_HEADER: [&str; 7] = ["t", "arm", "n_mean", "n_std", "muhat_mean", "muhat_std", "matched"];
pub const RATE_HEADER: [&str; 7] = ["r", "action", "rate", "ir_hat", "n_solutions", "residual", "converged"];
pub const TRAJECTORY_THEORY_HEADER: [&str; 6] = ["t", "arm", "n", "muhat", "is_hat", "in_hat"];
pub const BRANCHES_HEADER: [&str; 5] = ["r", "branch_id", "delta_s0", "ir_hat", "action"];
pub const SWEEP_HEADER: [&str; 2] = ["c", "r_mpv"];

/// Where outputs go and how many worker threads run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub workers: usize,
}

impl RunContext {
    fn finish<R: Serialize>(
        &self,
        outputs: &mut Outputs,
        command: &str,
        cfg: &ExperimentConfig,
        started: Instant,
        results: R,
    ) -> Result<(), CliError> {
        let meta = Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            seed: cfg.seed(),
            workers: self.workers,
            wall_time_s: started.elapsed().as_secs_f64(),
            results,
        };
        outputs.write_json("metadata.json", &meta)
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn solver_options(rate: &RateConfig, seed: u64) -> RateOptions {
    RateOptions {
        solver: SolverOptions {
            variant: rate.variant,
            ..SolverOptions::default()
        },
        strategy: SolveStrategy {
            multistarts: rate.multistarts,
            rng_seed: seed,
            ..SolveStrategy::default()
        },
    }
}

fn solver_spec(cfg: &ExperimentConfig) -> Result<BanditSpec, CliError> {
    let spec = cfg.spec.build()?;
    if !(spec.gamma() > 0.0) {
        return Err(CliError::Config("the saddle-point solver needs gamma > 0".into()));
    }
    Ok(spec)
}

fn check_window(w: [f64; 2]) -> Result<(f64, f64), CliError> {
    if w[0].is_finite() && w[1].is_finite() && w[0] < w[1] {
        Ok((w[0], w[1]))
    } else {
        Err(CliError::Config(format!("regret window [{}, {}) is empty or not finite", w[0], w[1])))
    }
}

pub fn histogram_rows(hist: &banditpath::RegretHistogram, gamma: f64) -> Result<Vec<Vec<String>>, CliError> {
    let phi = empirical_action(hist)?;
    let counts = hist.counts().iter().filter(|(_, &c)| c > 0);
    Ok(counts
        .zip(phi)
        .map(|((_, &count), (r, p))| vec![num(r), count.to_string(), num(p), num(gamma * p)])
        .collect())
}

fn conditioned_rows(st: &ConditionedStats) -> Vec<Vec<String>> {
    if st.is_empty() {
        return Vec::new();
    }
    let mut rows = Vec::new();
    for t in 0..=st.horizon() {
        for k in 0..st.arms() {
            rows.push(vec![
                t.to_string(),
                (k + 1).to_string(),
                num(st.n_mean(k, t)),
                num(st.n_std(k, t)),
                num(st.muhat_mean(k, t)),
                num(st.muhat_std(k, t)),
                st.matched().to_string(),
            ]);
        }
    }
    rows
}

fn theory_rows(field: Option<&SaddleField>) -> Vec<Vec<String>> {
    let Some(f) = field else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for t in 0..=f.horizon() {
        for k in 0..f.arms() {
            rows.push(vec![
                t.to_string(),
                (k + 1).to_string(),
                num(f.n[(k, t)]),
                num(f.mean_reward(k, t)),
                num(f.is_hat[(k, t)]),
                num(f.in_hat[(k, t)]),
            ]);
        }
    }
    rows
}

#[derive(Debug, Serialize)]
struct SimulateResults {
    trials: u64,
    windows: Vec<(f64, f64)>,
    matched: Vec<u64>,
    non_finite: u64,
}

/// Regret histogram and empirical action; one conditioned-trajectory file
/// per configured window (`trajectory_sim_w0.csv`, ...).
pub fn cmd_simulate(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<EnsembleResult, CliError> {
    let started = Instant::now();
    let spec = cfg.spec.build()?;
    let sim = &cfg.simulate;
    if sim.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    if !(sim.bin_width > 0.0 && sim.bin_width.is_finite()) {
        return Err(CliError::Config("bin_width must be positive".into()));
    }
    let windows = sim.windows.iter().map(|&w| check_window(w)).collect::<Result<Vec<_>, _>>()?;
    let mut files = names(&["histogram.csv", "metadata.json"]);
    files.extend((0..windows.len()).map(|i| format!("trajectory_sim_w{i}.csv")));
    let mut outputs = Outputs::prepare(&ctx.out, &files)?;

    let result = run_ensemble(
        &spec,
        &EnsembleConfig {
            trials: sim.trials,
            master_seed: sim.master_seed,
            bin_width: sim.bin_width,
            origin: 0.0,
            windows: windows.clone(),
            workers: Some(ctx.workers),
        },
    )?;
    outputs.write_csv("histogram.csv", &HISTOGRAM_HEADER, histogram_rows(&result.histogram, spec.gamma())?)?;
    for (i, st) in result.conditioned.iter().enumerate() {
        outputs.write_csv(&format!("trajectory_sim_w{i}.csv"), &TRAJECTORY_SIM_HEADER, conditioned_rows(st))?;
    }
    let results = SimulateResults {
        trials: sim.trials,
        windows,
        matched: result.conditioned.iter().map(|s| s.matched()).collect(),
        non_finite: result.histogram.underflow() + result.histogram.overflow(),
    };
    ctx.finish(&mut outputs, "simulate", cfg, started, results)?;
    Ok(result)
}

#[derive(Debug, Serialize)]
struct RateResults {
    r_mpv: f64,
    kinks: Vec<f64>,
    converged_fraction: f64,
}

fn check_convergence(curve: &RateCurve) -> Result<(), CliError> {
    let failed = curve.converged.iter().filter(|&&c| !c).count();
    let total = curve.converged.len();
    if 2 * failed > total {
        return Err(CliError::NonConvergence { failed, total });
    }
    Ok(())
}

/// Rate function on the configured grid. Fails with a non-convergence
/// error, after writing every output, when more than half the grid failed.
pub fn cmd_rate(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RateCurve, CliError> {
    let started = Instant::now();
    let spec = solver_spec(cfg)?;
    let grid = cfg.rate.grid()?;
    let mut outputs = Outputs::prepare(&ctx.out, &names(&["rate_curve.csv", "metadata.json"]))?;

    let curve = run_in_pool(ctx.workers, || rate_curve(&spec, &grid, &solver_options(&cfg.rate, cfg.seed())))??;
    let rows = (0..grid.len()).map(|i| {
        vec![
            num(curve.r_grid[i]),
            num(curve.action[i]),
            num(curve.rate[i]),
            num(curve.ir_hat[i]),
            curve.n_solutions[i].to_string(),
            num(curve.residual[i]),
            curve.converged[i].to_string(),
        ]
    });
    outputs.write_csv("rate_curve.csv", &RATE_HEADER, rows)?;
    let kinks = detect_kinks(&curve.r_grid, &curve.rate, &curve.noise_floor());
    let results = RateResults {
        r_mpv: curve.r_mpv,
        kinks: kinks.iter().map(|&i| curve.r_grid[i]).collect(),
        converged_fraction: curve.converged_fraction(),
    };
    ctx.finish(&mut outputs, "rate", cfg, started, results)?;
    check_convergence(&curve)?;
    Ok(curve)
}

/// Minimal-action saddle point at `r`, reached by continuation from the
/// most probable regret in steps of at most `step`.
pub fn minimal_solution(spec: &BanditSpec, r: f64, step: f64, opts: &RateOptions) -> Result<Option<SaddleField>, CliError> {
    let r_mpv = most_probable_regret(spec)?;
    let span = r - r_mpv;
    let pieces = (span.abs() / step).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=pieces).map(|i| r_mpv + span * i as f64 / pieces as f64).collect();
    grid[pieces] = r;
    if span < 0.0 {
        grid.reverse();
    }
    grid.dedup();
    let curve = rate_curve(spec, &grid, opts)?;
    let at = grid.iter().position(|&x| x == r).expect("target is on the grid");
    Ok(curve.minimal(at).cloned())
}

#[derive(Debug)]
pub struct TrajectoryReport {
    pub sim: ConditionedStats,
    pub theory: Option<SaddleField>,
}

#[derive(Debug, Serialize)]
struct TrajectoryResults {
    window: (f64, f64),
    theory_regret: f64,
    matched: u64,
    theory_action: Option<f64>,
    theory_rate: Option<f64>,
}

/// Conditioned simulation statistics for the window and the dominant
/// trajectory at its midpoint.
pub fn cmd_trajectory(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<TrajectoryReport, CliError> {
    let started = Instant::now();
    let spec = solver_spec(cfg)?;
    let window = check_window(cfg.trajectory.r_window)?;
    if cfg.trajectory.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    if !(cfg.rate.r_step > 0.0 && cfg.rate.r_step.is_finite()) {
        return Err(CliError::Config("r_step must be positive".into()));
    }
    let mut outputs = Outputs::prepare(
        &ctx.out,
        &names(&["trajectory_theory.csv", "trajectory_sim.csv", "metadata.json"]),
    )?;

    let mut sim = run_ensemble(
        &spec,
        &EnsembleConfig {
            trials: cfg.trajectory.trials,
            master_seed: cfg.seed(),
            bin_width: cfg.simulate.bin_width,
            origin: 0.0,
            windows: vec![window],
            workers: Some(ctx.workers),
        },
    )?;
    let sim = sim.conditioned.remove(0);
    let mid = 0.5 * (window.0 + window.1);
    let opts = solver_options(&cfg.rate, cfg.seed());
    let theory = run_in_pool(ctx.workers, || minimal_solution(&spec, mid, cfg.rate.r_step, &opts))??;

    outputs.write_csv("trajectory_theory.csv", &TRAJECTORY_THEORY_HEADER, theory_rows(theory.as_ref()))?;
    outputs.write_csv("trajectory_sim.csv", &TRAJECTORY_SIM_HEADER, conditioned_rows(&sim))?;
    let results = TrajectoryResults {
        window,
        theory_regret: mid,
        matched: sim.matched(),
        theory_action: theory.as_ref().map(|f| f.action),
        theory_rate: theory.as_ref().map(|f| spec.gamma() * f.action),
    };
    ctx.finish(&mut outputs, "trajectory", cfg, started, results)?;
    if theory.is_none() {
        return Err(CliError::NonConvergence { failed: 1, total: 1 });
    }
    Ok(TrajectoryReport { sim, theory })
}

#[derive(Debug)]
pub struct ToyReport {
    pub r_c: f64,
    pub branches: Vec<(f64, Vec<ToyBranch>)>,
}

#[derive(Debug, Serialize)]
struct ToyResults {
    r_c: f64,
    r_mpv: f64,
    branch_counts: Vec<(f64, usize)>,
}

/// Branches of the two-arm, one-step system and its critical regret.
pub fn cmd_toy(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ToyReport, CliError> {
    let started = Instant::now();
    let toy = ToySpec::new(cfg.toy.mu, cfg.spec.gamma, cfg.spec.beta).map_err(|e| CliError::Config(e.to_string()))?;
    let bracket = check_window(cfg.toy.bracket)
        .map_err(|_| CliError::Config(format!("malformed bracket {:?}", cfg.toy.bracket)))?;
    if cfg.toy.r_values.iter().any(|r| !r.is_finite()) {
        return Err(CliError::Config("toy regret values must be finite".into()));
    }
    if cfg.toy.grid_points < 2 {
        return Err(CliError::Config("toy grid needs at least two points".into()));
    }
    let mut outputs = Outputs::prepare(&ctx.out, &names(&["branches.csv", "metadata.json"]))?;

    let r_c = critical_regret(&toy, bracket).map_err(|e| CliError::Config(e.to_string()))?;
    let mut branches = Vec::new();
    for &r in &cfg.toy.r_values {
        branches.push((r, find_branches(r, &toy, None, cfg.toy.grid_points)?));
    }
    let rows = branches.iter().flat_map(|(r, list)| {
        list.iter().map(move |b| {
            vec![num(*r), b.branch_id.to_string(), num(b.delta_s0), num(b.ir_hat), num(b.action)]
        })
    });
    outputs.write_csv("branches.csv", &BRANCHES_HEADER, rows)?;
    let results = ToyResults {
        r_c,
        r_mpv: toy.most_probable_regret(),
        branch_counts: branches.iter().map(|(r, b)| (*r, b.len())).collect(),
    };
    ctx.finish(&mut outputs, "toy", cfg, started, results)?;
    Ok(ToyReport { r_c, branches })
}

#[derive(Debug, Serialize)]
struct SweepResults {
    non_decreasing: bool,
}

/// Most probable regret for each exploration parameter.
pub fn cmd_sweep_c(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<(f64, f64)>, CliError> {
    let started = Instant::now();
    let spec = cfg.spec.build()?;
    let cs = &cfg.sweep.c_values;
    if cs.is_empty() || cs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(CliError::Config("c_values must be a non-empty list of finite c >= 0".into()));
    }
    let mut outputs = Outputs::prepare(&ctx.out, &names(&["rmpv_vs_c.csv", "metadata.json"]))?;

    let mut table = Vec::with_capacity(cs.len());
    for &c in cs {
        table.push((c, most_probable_regret(&spec.with_c(c)?)?));
    }
    outputs.write_csv(
        "rmpv_vs_c.csv",
        &SWEEP_HEADER,
        table.iter().map(|&(c, r)| vec![num(c), num(r)]),
    )?;
    let mut sorted = table.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let results = SweepResults {
        non_decreasing: sorted.windows(2).all(|w| w[1].1 >= w[0].1),
    };
    ctx.finish(&mut outputs, "sweep-c", cfg, started, results)?;
    Ok(table)
}

fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
