// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::CliError;

/// Link budget, slot-split optimizer and Monte Carlo checks for a hybrid
/// molecular / electromagnetic relay chain.
#[derive(Parser, Debug)]
#[command(name = "hybrid-ber", version)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Scenario file, or the name of a bundled preset (e.g. `fig8-wx10`).
    #[arg(long, default_value = "table3")]
    config: String,

    /// Override a scenario value, e.g. `molecular.threshold_dest=120`.
    #[arg(long = "override", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,

    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate link and end-to-end error probabilities along one parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        var: SweepVar,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 51)]
        points: usize,
    },
    /// Find the molecular share of the slot that minimizes end-to-end BER.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = hybrid_ber::optimize::DEFAULT_EPSILON)]
        epsilon: f64,
        /// Grid points of the written profile.
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Also write the summary record to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Compare analytic hit probabilities and relay BER with simulation.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        particles: u64,
        /// Simulated bits for the relay BER checkpoint; 0 skips it.
        #[arg(long, default_value_t = 10_000)]
        bits: u64,
        /// Time steps per observation window (at least 100).
        #[arg(long, default_value_t = 100)]
        steps: u32,
    },
    /// List the bundled presets.
    Presets,
}

/// Swept quantity and its unit on the CSV axis.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Destination threshold (molecules).
    ThresholdDest,
    /// Relay y coordinate (μm).
    RelayY,
    /// Drift along y (μm/s).
    DriftY,
    /// Molecular symbol duration (ms).
    TDmc,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("`{s}` is not KEY=VALUE"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sweep {
            scenario,
            var,
            from,
            to,
            points,
        } => commands::sweep(&scenario.config, &scenario.overrides, var, from, to, points, scenario.out.as_deref()),
        Command::Optimize {
            scenario,
            epsilon,
            points,
            summary,
        } => commands::optimize(
            &scenario.config,
            &scenario.overrides,
            epsilon,
            points,
            scenario.out.as_deref(),
            summary.as_deref(),
        ),
        Command::Validate {
            scenario,
            seed,
            particles,
            bits,
            steps,
        } => commands::validate(
            &scenario.config,
            &scenario.overrides,
            commands::ValidateOpts {
                seed,
                particles,
                bits,
                steps,
            },
            scenario.out.as_deref(),
        ),
        Command::Presets => {
            for (name, _) in hybrid_ber::presets::PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}
