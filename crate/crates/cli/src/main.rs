use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srdkf_cli::config::defaults_help;
use srdkf_cli::run::{execute, Outcome, Preset, RunConfig};
use srdkf_core::exec::ExecutionMode;
use srdkf_core::netsim::EstimatorKind;

#[derive(Parser)]
#[command(
    name = "srdkf",
    version,
    about = "Secure GPS timing over a receiver network: set-valued vs point-valued filters under spoofing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset or a scenario file and write CSV/JSON results.
    #[command(after_long_help = defaults_help())]
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Seven receivers, ramp attacks on receivers 5 and 1.
    Coordinated,
    /// Meaconing sweep over magnitudes and network sizes.
    Robustness,
    /// Use --scenario instead.
    None,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = PresetArg::None)]
    preset: PresetArg,
    /// Scenario JSON file; only with --preset none.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Base seed; run r of a batch uses seed + r. Overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo runs [default: 1, or 50 per cell for robustness].
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated subset of srdkf,pvdkf,akf. Overrides the file.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorKind>>,
    /// Disable the data-parallel execution.
    #[arg(long)]
    sequential: bool,
    /// Skip timeseries.csv; summaries are still written.
    #[arg(long)]
    no_timeseries: bool,
}

fn main() -> ExitCode {
    let Command::Run(args) = Cli::parse().command;
    let cfg = RunConfig {
        preset: match args.preset {
            PresetArg::Coordinated => Preset::Coordinated,
            PresetArg::Robustness => Preset::Robustness,
            PresetArg::None => Preset::None,
        },
        scenario: args.scenario,
        out: args.out,
        seed: args.seed,
        runs: args.runs,
        estimators: args.estimators,
        mode: if args.sequential {
            ExecutionMode::Sequential
        } else {
            ExecutionMode::Parallel
        },
        timeseries: !args.no_timeseries,
    };
    match execute(&cfg) {
        Ok(outcome) => {
            let what = match outcome {
                Outcome::Single(r) => format!("{} iterations", r.iterations),
                Outcome::Batch(b) => format!("{} runs", b.runs),
                Outcome::Sweep(c) => format!("{} robustness cells", c.len()),
            };
            eprintln!("wrote {what} to {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
