use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use reachguard_cli::commands;
use reachguard_cli::RunConfig;

/// Safety filter for planner-controlled mobile robots: data collection,
/// guarded episode runs, soundness verification, gradient checks, timing
/// benchmarks, and plot-data emission.
#[derive(Parser)]
#[command(name = "reachguard", version, about)]
struct Cli {
    /// TOML configuration file; omitted keys use documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Base seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect offline excitation data in an empty arena and write the
    /// trajectory CSV.
    Collect {
        /// State rows to record.
        #[arg(long, default_value_t = 600)]
        steps: usize,
        /// Collection seed (defaults to the config collect seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path.
        #[arg(long, default_value = "trajectories.csv")]
        out: PathBuf,
    },
    /// Run guarded episodes and write per-episode logs.
    Run {
        /// World preset: open, world, house, or lab.
        #[arg(long)]
        world: Option<String>,
        /// Planner: scripted, adversarial, or llm.
        #[arg(long, default_value = "scripted")]
        planner: String,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Episode seed base (defaults to the global seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo reach-tube soundness check.
    VerifyReach {
        /// Total rollouts across all random plans.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Finite-difference validation of the collision-gradient chain.
    CheckGradients {
        /// Non-degenerate instances to accumulate.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Time the safety layer across obstacle counts and horizons.
    Bench,
    /// Emit plot data (trajectory, obstacles, reach polygons, SVG) from an
    /// episode log.
    Plot {
        logfile: PathBuf,
        #[arg(long, default_value = "plot")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.out_dir {
        config.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match cli.command {
        Command::Collect { steps, seed, out } => {
            let seed = seed.unwrap_or(config.collect.seed);
            commands::cmd_collect(&config, steps, seed, &out)?;
            Ok(true)
        }
        Command::Run {
            world,
            planner,
            episodes,
            seed,
        } => {
            let seed = seed.unwrap_or(config.seed);
            let summary =
                commands::cmd_run(&config, world.as_deref(), &planner, episodes, seed)?;
            Ok(summary.collisions == 0)
        }
        Command::VerifyReach { samples } => {
            let report = commands::cmd_verify_reach(&config, samples)?;
            Ok(report.pass)
        }
        Command::CheckGradients { instances } => {
            let instances = instances.unwrap_or(config.gradients.instances);
            let report = commands::cmd_check_gradients(&config, instances)?;
            Ok(report.pass)
        }
        Command::Bench => {
            commands::cmd_bench(&config)?;
            Ok(true)
        }
        Command::Plot { logfile, out } => {
            commands::cmd_plot(&config, &logfile, &out)?;
            Ok(true)
        }
    }
}
