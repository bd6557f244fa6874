//! Count-interval quantization toolkit. Each subcommand performs one
//! pipeline stage and prints a one-line JSON summary on success; chaining
//! them through files reproduces the in-process library results bit for
//! bit, including under `--jobs N`.
//!
//! Exit codes: 0 success, 1 data error, 2 parameter error, 3 infeasible
//! partition.

mod commands;
mod support;

use clap::Parser;
use uep_core::{ErrorClass, UepError};

#[derive(Parser)]
#[command(name = "uep", version, about = "Optimal count-interval quantization toolkit")]
enum Cli {
    /// Generate synthetic point annotations.
    Synth(commands::SynthArgs),
    /// Turn annotations into density map grids.
    Densify(commands::DensifyArgs),
    /// Aggregate density maps into local count grids and a pooled
    /// collection.
    Counts(commands::CountsArgs),
    /// Fit interval borders on a count collection.
    Partition(commands::PartitionArgs),
    /// Fit decoding proxies for a partition.
    Proxies(commands::ProxiesArgs),
    /// Derive the interleaved second prediction head.
    Iph(commands::IphArgs),
    /// Encode local count grids into class grids.
    Quantize(commands::QuantizeArgs),
    /// Corrupt class grids with a seeded noise model.
    Simulate(commands::SimulateArgs),
    /// Decode predictions and report counting error.
    Analyze(commands::AnalyzeArgs),
    /// Run the strategy-by-method grid over seeds.
    Compare(commands::CompareArgs),
    /// Render a JSON document as CSV for plotting.
    Report(commands::ReportArgs),
}

fn run(cli: &Cli) -> anyhow::Result<serde_json::Value> {
    use Cli::*;
    match cli {
        Synth(args) => commands::synth(args),
        Densify(args) => {
            support::init_jobs(args.jobs)?;
            commands::densify(args)
        }
        Counts(args) => {
            support::init_jobs(args.jobs)?;
            commands::counts(args)
        }
        Partition(args) => commands::partition(args),
        Proxies(args) => commands::proxies(args),
        Iph(args) => commands::iph(args),
        Quantize(args) => {
            support::init_jobs(args.jobs)?;
            commands::quantize(args)
        }
        Simulate(args) => {
            support::init_jobs(args.jobs)?;
            commands::simulate(args)
        }
        Analyze(args) => commands::analyze(args),
        Compare(args) => {
            support::init_jobs(args.jobs)?;
            commands::compare(args)
        }
        Report(args) => commands::report(args),
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<UepError>().map(UepError::class) {
        Some(ErrorClass::Parameter) => 2,
        Some(ErrorClass::Infeasible) => 3,
        Some(ErrorClass::Data) | None => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}
