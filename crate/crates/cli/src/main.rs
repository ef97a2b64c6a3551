use std::path::PathBuf;
use std::process::ExitCode;

use banditpath_cli::{
    cmd_rate, cmd_simulate, cmd_sweep_c, cmd_toy, cmd_trajectory, resolve_workers, CliError, ExperimentConfig,
    Overrides, RunContext, THREADS_ENV,
};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "banditpath", version, about = "Regret statistics of softmax-UCB bandits")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config (or a metadata.json from an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    r_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    r_max: Option<f64>,
    #[arg(long, global = true)]
    r_step: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo regret histogram and empirical action.
    Simulate,
    /// Rate function from the saddle-point equations over a regret grid.
    Rate,
    /// Conditioned simulated trajectories next to the dominant one.
    Trajectory,
    /// Branches and critical regret of the two-arm, one-step system.
    Toy,
    /// Most probable regret as a function of the exploration parameter.
    SweepC,
}

fn run(args: &Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        trials: args.trials,
        r_min: args.r_min,
        r_max: args.r_max,
        r_step: args.r_step,
        c: args.c,
        gamma: args.gamma,
        beta: args.beta,
    });
    let ctx = RunContext {
        out: args.out.clone(),
        workers: resolve_workers(args.threads),
    };
    match args.command {
        Command::Simulate => cmd_simulate(&cfg, &ctx).map(|_| ()),
        Command::Rate => cmd_rate(&cfg, &ctx).map(|_| ()),
        Command::Trajectory => cmd_trajectory(&cfg, &ctx).map(|_| ()),
        Command::Toy => cmd_toy(&cfg, &ctx).map(|r| println!("r_c = {}", r.r_c)),
        Command::SweepC => cmd_sweep_c(&cfg, &ctx).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
