//! `awcbir`: ingest, segment, query, rank and export AWiFS tiles held in a
//! chunked store.
//!
//! Exit codes: 0 success, 2 invalid input or config, 3 I/O failure,
//! 4 tile, record or mask not found.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "awcbir", version, about = "Water and burnt-area segmentation and retrieval for AWiFS tiles")]
pub struct Cli {
    /// Store root directory.
    #[arg(long, global = true, env = "AWCBIR_STORE")]
    pub store: Option<PathBuf>,
    /// Worker threads; 0 uses every processor.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Log each stage to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chunk and store the four band files of a tile.
    Ingest(IngestArgs),
    /// Calibrate a stored tile and produce water and/or burnt masks.
    Segment(SegmentArgs),
    /// List catalog records matching filters.
    Query(QueryArgs),
    /// Rank catalog records by similarity to a reference record.
    Rank(RankArgs),
    /// Write a stored mask as PGM or 16-bit TIFF.
    ExportMask(ExportArgs),
    /// Generate a planted synthetic tile (band TIFFs, metadata, calibration).
    Synth(SynthArgs),
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("expected YYYY-MM-DD: {e}"))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Must match the metadata sidecar when given.
    #[arg(long)]
    pub tile: Option<String>,
    /// Must match the metadata sidecar when given.
    #[arg(long, value_parser = parse_date)]
    pub date: Option<NaiveDate>,
    #[arg(long)]
    pub b2: PathBuf,
    #[arg(long)]
    pub b3: PathBuf,
    #[arg(long)]
    pub b4: PathBuf,
    #[arg(long)]
    pub b5: PathBuf,
    /// JSON metadata sidecar.
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long, default_value_t = awcbir::tile_io::DEFAULT_CHUNK_SIDE)]
    pub chunk_side: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Water,
    Burnt,
    Both,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub tile: String,
    #[arg(long, value_parser = parse_date)]
    pub date: NaiveDate,
    /// TOML calibration file.
    #[arg(long)]
    pub calibration: PathBuf,
    /// Threshold config; built-in defaults when omitted.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub target: TargetArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Tsv,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub tile: Option<String>,
    #[arg(long, value_parser = parse_date)]
    pub from: Option<NaiveDate>,
    #[arg(long, value_parser = parse_date)]
    pub to: Option<NaiveDate>,
    /// Inclusive water percentage interval `lo:hi`; either end may be empty.
    #[arg(long)]
    pub query_water: Option<String>,
    /// Inclusive burnt percentage interval `lo:hi`; either end may be empty.
    #[arg(long)]
    pub query_burnt: Option<String>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Reference record as `TILE@YYYY-MM-DD`.
    #[arg(long)]
    pub reference: String,
    /// `w_water,w_burnt,w_overlap`
    #[arg(long, default_value = "1,1,1")]
    pub weights: String,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MaskFormatArg {
    Pgm,
    Tiff,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub tile: String,
    #[arg(long, value_parser = parse_date)]
    pub date: NaiveDate,
    /// `water` or `burnt`.
    #[arg(long)]
    pub kind: String,
    #[arg(long, value_enum, default_value = "pgm")]
    pub format: MaskFormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the band files and sidecars.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "SYN100")]
    pub tile: String,
    #[arg(long, value_parser = parse_date, default_value = "2013-03-22")]
    pub date: NaiveDate,
    #[arg(long, default_value_t = 100)]
    pub width: u32,
    #[arg(long, default_value_t = 100)]
    pub height: u32,
    #[arg(long, default_value_t = 400)]
    pub clear: usize,
    #[arg(long, default_value_t = 300)]
    pub muddy: usize,
    #[arg(long, default_value_t = 250)]
    pub burnt: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 20.0)]
    pub latitude: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot start {} workers: {e}", cli.jobs)))?;
    }
    let ctx = commands::Context { store: cli.store, verbose: cli.verbose };
    match cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Segment(a) => commands::segment(&ctx, a),
        Command::Query(a) => commands::query(&ctx, a),
        Command::Rank(a) => commands::rank(&ctx, a),
        Command::ExportMask(a) => commands::export_mask(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
