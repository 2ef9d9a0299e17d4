use clap::{Parser, Subcommand};
use errw_lab::harness::{run, ExperimentConfig, Mode, RunError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulation and exact-verification toolkit for interacting edge-reinforced
/// random walks.
#[derive(Parser)]
#[command(name = "errw-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON). Omit to use the mode's built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's replica count.
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Override the config's step count.
    #[arg(long, global = true)]
    steps: Option<u64>,
    /// Worker threads for replica-level parallelism (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo replicas of walkers on the three-node segment.
    SimulateSegment,
    /// Exact cycle-time or urn law, exported as rational CSV.
    ExactSegment,
    /// Monte Carlo replicas of K walkers on the integer line.
    SimulateZ,
    /// Divergence classification of an increment sequence.
    Classify,
    /// The histogram/fit datasets behind the density figures.
    ReproduceFigures,
    /// Run every exact identity check; nonzero exit on any failure.
    VerifyIdentities,
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::SimulateSegment => Mode::SimulateSegment,
            Command::ExactSegment => Mode::ExactSegment,
            Command::SimulateZ => Mode::SimulateZ,
            Command::Classify => Mode::Classify,
            Command::ReproduceFigures => Mode::ReproduceFigures,
            Command::VerifyIdentities => Mode::VerifyIdentities,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let mode = cli.command.mode();
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut config = ExperimentConfig::from_json(&text)?;
            config.mode = mode;
            config
        }
        None => ExperimentConfig::default_for(mode),
    };
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(replicas) = cli.replicas {
        config.replicas = replicas;
    }
    if let Some(steps) = cli.steps {
        config.steps = steps;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }

    let report = run(&config)?;
    for line in &report.lines {
        println!("{line}");
    }
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}
