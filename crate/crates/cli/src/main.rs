use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sppc_cli::{cmd_montecarlo, cmd_simulate, cmd_synthesize, CliError, ExperimentConfig, Parallelism, SolverChoice};

#[derive(Parser)]
#[command(name = "sppc", version, about = "Sparse packetized predictive control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for P, rho, c, E and W and write manifest.json.
    Synthesize(Common),
    /// Run one closed-loop trial per solver and write trace.csv.
    Simulate(Common),
    /// Run a Monte Carlo batch and write aggregate.csv and summary.json.
    Montecarlo(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    /// Worker threads for Monte Carlo trials; 1 runs sequentially, 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if let Some(solver) = self.solver {
            config.solver = solver;
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize(args) => {
            let prepared = cmd_synthesize(&args.load()?, &args.out)?;
            let syn = &prepared.synthesis;
            println!(
                "rho = {:e}, c = {:e}, riccati iterations = {}",
                syn.rho, syn.c, syn.riccati_iterations
            );
        }
        Command::Simulate(args) => {
            let traces = cmd_simulate(&args.load()?, &args.out)?;
            for t in &traces {
                let last = t.records.last().expect("trace has k = 0");
                println!("final |x| = {:e} after {} drops", last.norm_x, t.drops());
            }
        }
        Command::Montecarlo(args) => {
            let report = cmd_montecarlo(&args.load()?, &args.out, Parallelism::from_jobs(args.jobs))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report.summary).expect("json serializes")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
