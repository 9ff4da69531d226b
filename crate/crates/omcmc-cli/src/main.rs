use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use omcmc_cli::{parse_config, run_experiment, Mode};

#[derive(Parser)]
#[command(name = "omcmc", about = "Orthogonal parallel MCMC experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (JSON).
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for result files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write the first run's samples.csv.
    #[arg(long)]
    dump_samples: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler and report moment estimates.
    Sample(RunArgs),
    /// Run the annealed optimizer and report the best points found.
    Optimize(RunArgs),
    /// Compare the configured scheme against independent parallel chains at
    /// a matched evaluation budget.
    Benchmark(RunArgs),
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Sample(a) => (Mode::Sample, a),
        Command::Optimize(a) => (Mode::Optimize, a),
        Command::Benchmark(a) => (Mode::Benchmark, a),
    };
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut config = parse_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    config.validate()?;
    let out = args
        .out
        .is_absolute()
        .then(|| args.out.clone())
        .unwrap_or_else(|| std::env::current_dir().unwrap_or_default().join(&args.out));
    let aggregate = run_experiment(&config, mode, &out, args.dump_samples)?;
    println!("wrote {}", aggregate.display());
    Ok(())
}
