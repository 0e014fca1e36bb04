use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ntmp::{runner, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ntmp", version, about = "Learning from n-tuples with exactly m positives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write tuple files, the audit sidecar and pools for every seed
    Gen(Args),
    /// Train every method for every seed and write metrics and tables
    Train(Args),
    /// Run the class-prior estimation protocol
    EstimatePrior(Args),
    /// Retrain over a grid of priors and compute the robustness window
    Sweep(Args),
    /// Prior noise, count flips and the conditioning sweep
    Perturb(Args),
    /// Rebuild summary and significance tables from metrics.csv
    Report(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (TOML)
    #[arg(short, long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&Args, fn(&ExperimentConfig) -> ntmp::Result<Vec<PathBuf>>) = match &cli.command {
        Command::Gen(a) => (a, runner::cmd_gen),
        Command::Train(a) => (a, runner::cmd_train),
        Command::EstimatePrior(a) => (a, runner::cmd_estimate_prior),
        Command::Sweep(a) => (a, runner::cmd_sweep),
        Command::Perturb(a) => (a, runner::cmd_perturb),
        Command::Report(a) => (a, runner::cmd_report),
    };
    let result = ExperimentConfig::load(&args.config).and_then(|cfg| run(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
