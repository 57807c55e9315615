//! `geoseg`: batch front end for corpus preparation and evaluation.
//!
//! Data goes to files under `--out` (and summaries to stdout); logs go to
//! stderr. Exit codes: 0 success, 1 operational failure, 2 usage or
//! validation error.

mod commands;
mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use commands::convert::ConvertArgs;
use commands::evaluate::EvaluateArgs;
use commands::filter::FilterArgs;
use commands::merge::MergeArgs;
use commands::stats::StatsArgs;
use commands::tile::TileArgs;
use config::PipelineConfig;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "geoseg",
    version,
    about = "Building-height instance segmentation corpus tools"
)]
struct Cli {
    /// JSON config file layered over the defaults.
    #[arg(long, global = true, env = "GEOSEG_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut scenes into fixed-size tiles and clip their instances.
    Tile(TileArgs),
    /// Merge overlapping instances, keeping the tallest height.
    Merge(MergeArgs),
    /// Turn semantic building maps into instances.
    Convert(ConvertArgs),
    /// Drop images whose annotations disagree with a reference model.
    Filter(FilterArgs),
    /// Score detections: AP, mAP, confusion matrix and accuracies.
    Evaluate(EvaluateArgs),
    /// Height class counts and height histogram.
    Stats(StatsArgs),
}

fn execute(cli: &Cli) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    for assignment in &cli.set {
        cfg.set_str(assignment)?;
    }
    match &cli.command {
        Command::Tile(a) => commands::tile::run(a, cfg),
        Command::Merge(a) => commands::merge::run(a, cfg),
        Command::Convert(a) => commands::convert::run(a, cfg),
        Command::Filter(a) => commands::filter::run(a, cfg),
        Command::Evaluate(a) => commands::evaluate::run(a, cfg),
        Command::Stats(a) => commands::stats::run(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("GEOSEG_LOG")
        .format_timestamp(None)
        .init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
