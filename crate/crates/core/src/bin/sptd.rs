use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sptd::cli::{run, DisaggregateOptions, RunConfig, RunOutcome, SimulateConfig};
use sptd::disagg::{AggregationKind, Method};
use sptd::Error;

#[derive(Parser)]
#[command(name = "sptd", version, about = "Sparse temporal disaggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a high-frequency series from a low-frequency series and indicators.
    Disaggregate(DisaggregateArgs),
    /// Run a Monte-Carlo scenario described by a TOML file.
    Simulate(SimulateArgs),
}

#[derive(clap::Args)]
struct DisaggregateArgs {
    #[arg(long)]
    low_freq: Option<PathBuf>,
    #[arg(long)]
    indicators: Option<PathBuf>,
    /// chowlin, sptd, sptd-rf or adaptive [default: sptd-rf]
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    ratio: Option<usize>,
    /// sum, average, first or last [default: sum]
    #[arg(long)]
    scheme: Option<AggregationKind>,
    #[arg(long, allow_negative_numbers = true)]
    rho_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho_max: Option<f64>,
    #[arg(long)]
    rho_step: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// Standardise y and indicators before fitting (default for the sparse methods).
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,
    #[arg(long)]
    no_standardize: bool,
    /// Fill interior missing cells by linear interpolation.
    #[arg(long)]
    impute_linear: bool,
    #[arg(long)]
    out_series: Option<PathBuf>,
    #[arg(long)]
    out_report: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn build(cmd: Command) -> sptd::Result<RunConfig> {
    match cmd {
        Command::Disaggregate(a) => {
            let file = match &a.config {
                Some(p) => DisaggregateOptions::from_toml_file(p)?,
                None => DisaggregateOptions::default(),
            };
            let standardize = match (a.standardize, a.no_standardize) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            };
            let flags = DisaggregateOptions {
                low_freq: a.low_freq,
                indicators: a.indicators,
                method: a.method,
                ratio: a.ratio,
                scheme: a.scheme,
                rho_min: a.rho_min,
                rho_max: a.rho_max,
                rho_step: a.rho_step,
                cutoff: a.cutoff,
                standardize,
                impute_linear: a.impute_linear.then_some(true),
                out_series: a.out_series,
                out_report: a.out_report,
                threads: a.threads,
                seed: a.seed,
            };
            Ok(RunConfig::Disaggregate(file.overlay(flags).resolve()?))
        }
        Command::Simulate(a) => Ok(RunConfig::Simulate(SimulateConfig {
            scenario: a.scenario,
            out: a.out,
            threads: a.threads,
            seed: a.seed,
        })),
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error[{}]: {e}", e.category().as_str());
    ExitCode::from(e.category().exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build(cli.command) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match run(&config) {
        Ok(RunOutcome::Disaggregate(report)) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: rho = {:.2}, {} of {} indicators selected",
                report.method,
                report.rho_hat,
                report.coefficients.len(),
                report.n_indicators
            );
            ExitCode::SUCCESS
        }
        Ok(RunOutcome::Simulate { rows, notes }) => {
            for n in &notes {
                eprintln!("note: {n}");
            }
            println!("{rows} replicate rows written");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
