//! `stationkeep`: synthesize wind forecasts from radiosonde soundings,
//! classify their wind diversity, train DQN station-keeping agents, and
//! evaluate them.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error (parsing,
//! malformed or missing files), 4 runtime error (coverage gaps, training
//! aborts).

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::{parse_month_arg, Ctx, MonthArg};
use config::RunConfig;
use rand::Rng;
use stationkeep::error::Error;
use stationkeep::grid::LatLonBounds;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "stationkeep", version, about = "High-altitude balloon station-keeping toolkit")]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for all randomness. Omitted: drawn from entropy and
    /// recorded in output metadata.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build synthetic wind grids from radiosonde sounding CSVs.
    Synth {
        /// Directory of STATIONID_YYYYMMDDHH.csv files.
        #[arg(long)]
        soundings: PathBuf,
        /// Output area as min_lat,min_lon,max_lat,max_lon (default: station
        /// bounding box padded by one degree).
        #[arg(long, value_parser = parse_area)]
        area: Option<LatLonBounds>,
        /// Output file prefix.
        #[arg(long, default_value = "synthetic")]
        name: String,
    },
    /// Forecast Score at a coordinate or over random samples.
    Score {
        /// Grid header file (repeat for paired scoring).
        #[arg(long, required = true)]
        grid: Vec<PathBuf>,
        /// lat,lon of the column to score.
        #[arg(long, value_parser = parse_coordinate, conflicts_with = "random")]
        coordinate: Option<(f64, f64)>,
        /// Number of random coordinates to sample.
        #[arg(long)]
        random: Option<usize>,
        /// Drop zero scores from the returned distributions.
        #[arg(long)]
        filter_zero: bool,
    },
    /// Train a DQN station-keeping policy.
    Train {
        /// Truth (movement) grid, repeatable; pairs with --forecast by position.
        #[arg(long, required = true)]
        truth: Vec<PathBuf>,
        /// Forecast (observation) grid, repeatable.
        #[arg(long, required = true)]
        forecast: Vec<PathBuf>,
        /// Override the configured total environment steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Pause at the first episode boundary past this many env steps.
        #[arg(long)]
        stop_after: Option<u64>,
        /// Resume from a saved training state (checkpoint stem).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Persist intermediate checkpoints every N env steps.
        #[arg(long)]
        checkpoint_every: Option<u64>,
    },
    /// Evaluate a trained policy over one or more months.
    Eval {
        /// Checkpoint stem (as written by train).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Month spec LABEL=TRUTH.json:FORECAST.json, repeatable.
        #[arg(long = "month", value_parser = parse_month_arg, required = true)]
        months: Vec<MonthArg>,
        /// Episodes per month (overrides config).
        #[arg(long)]
        episodes: Option<usize>,
        /// Worker threads (1 = single-threaded reference mode; results are
        /// identical at any count).
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write one trajectory CSV per episode.
        #[arg(long)]
        export_trajectories: bool,
    },
    /// Per-level angular/magnitude differences between two wind models.
    Compare {
        #[arg(long)]
        grid_a: PathBuf,
        #[arg(long)]
        grid_b: PathBuf,
    },
}

fn parse_coordinate(s: &str) -> Result<(f64, f64), String> {
    let (lat, lon) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lat,lon, got {s:?}"))?;
    let lat: f64 = lat.trim().parse().map_err(|e| format!("bad latitude: {e}"))?;
    let lon: f64 = lon.trim().parse().map_err(|e| format!("bad longitude: {e}"))?;
    Ok((lat, lon))
}

fn parse_area(s: &str) -> Result<LatLonBounds, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad area: {e}"))?;
    if parts.len() != 4 {
        return Err(format!("expected min_lat,min_lon,max_lat,max_lon, got {s:?}"));
    }
    Ok(LatLonBounds {
        min_lat: parts[0],
        min_lon: parts[1],
        max_lat: parts[2],
        max_lon: parts[3],
    })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Parse { .. }
        | Error::Data(_)
        | Error::EmptyInput(_)
        | Error::Rejected { .. }
        | Error::Io(_)
        | Error::Json(_) => 3,
        Error::Bounds { .. }
        | Error::Coverage { .. }
        | Error::State(_)
        | Error::Training(_)
        | Error::Shape { .. } => 4,
    }
}

fn run(cli: Cli) -> stationkeep::Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let seed = cli
        .seed
        .or(config.seed)
        .unwrap_or_else(|| rand::rng().random());
    let ctx = Ctx::new(config, seed, cli.out);

    match cli.command {
        Command::Synth { soundings, area, name } => commands::cmd_synth(&ctx, &soundings, area, &name),
        Command::Score {
            grid,
            coordinate,
            random,
            filter_zero,
        } => commands::cmd_score(&ctx, &grid, coordinate, random, filter_zero),
        Command::Train {
            truth,
            forecast,
            steps,
            stop_after,
            resume,
            checkpoint_every,
        } => commands::cmd_train(
            &ctx,
            &truth,
            &forecast,
            steps,
            stop_after,
            resume.as_deref(),
            checkpoint_every,
        ),
        Command::Eval {
            checkpoint,
            months,
            episodes,
            workers,
            export_trajectories,
        } => commands::cmd_eval(&ctx, &checkpoint, &months, episodes, workers, export_trajectories),
        Command::Compare { grid_a, grid_b } => commands::cmd_compare(&ctx, &grid_a, &grid_b),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
