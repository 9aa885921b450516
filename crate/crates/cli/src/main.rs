//! `biphoton`: simulate, preprocess, retrieve and analyze two-photon
//! joint spectral amplitudes.

mod commands;
mod export;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biphoton::ConstraintMask;
use commands::{AnalyzeArgs, CliError, Globals, RetrieveArgs};
use export::ChirpUnits;

#[derive(Parser, Debug)]
#[command(
    name = "biphoton",
    version,
    about = "Two-photon state reconstruction from frequency/time correlation maps"
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Pipeline manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory, or output file for `retrieve` and `analyze`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides the manifest's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Units for reported chirps.
    #[arg(long, global = true, value_enum, default_value_t = ChirpUnits::Fs2)]
    units: ChirpUnits,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the four simulated planes and truth.json.
    Simulate,
    /// Resample, background-correct and deconvolve four measured planes.
    Preprocess {
        /// A directory, a manifest, or the four ww/wt/tw/tt files.
        #[arg(long, num_args = 1..=4, required = true)]
        measurements: Vec<PathBuf>,
    },
    /// Run the phase retrieval and write result.json.
    Retrieve {
        #[arg(long, num_args = 1..=4, required = true)]
        measurements: Vec<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Planes to project on, e.g. `wwtt` or `ww,wt,tw,tt`.
        #[arg(long)]
        mask: Option<ConstraintMask>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Fit the spectral phase of a result and compute the witness.
    Analyze {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, num_args = 1..=4)]
        measurements: Vec<PathBuf>,
        #[arg(long)]
        fit_order: Option<u32>,
        #[arg(long)]
        mask_sigma: Option<f64>,
    },
    /// Run every stage from one manifest.
    Pipeline,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.globals.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let g = Globals {
        manifest: cli.globals.manifest,
        out: cli.globals.out,
        seed: cli.globals.seed,
        units: cli.globals.units,
    };
    let outcome = match cli.command {
        Command::Simulate => commands::cmd_simulate(&g),
        Command::Preprocess { measurements } => commands::cmd_preprocess(&g, &measurements),
        Command::Retrieve {
            measurements,
            iterations,
            mask,
            restarts,
        } => commands::cmd_retrieve(
            &g,
            &RetrieveArgs {
                measurements,
                iterations,
                mask,
                restarts,
            },
        ),
        Command::Analyze {
            result,
            measurements,
            fit_order,
            mask_sigma,
        } => commands::cmd_analyze(
            &g,
            &AnalyzeArgs {
                result,
                measurements,
                fit_order,
                mask_sigma,
            },
        ),
        Command::Pipeline => commands::cmd_pipeline(&g),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
