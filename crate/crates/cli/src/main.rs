//! `cathseg`: simulate catheter models, generate phantoms, segment volumes
//! and score the results.

mod commands;
mod failure;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cathseg::engine::parse_tolerance;

#[derive(Parser, Debug)]
#[command(
    name = "cathseg",
    version,
    about = "Model-guided catheter segmentation in 3D volumes"
)]
struct Cli {
    /// More log output; repeat for debug messages.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the spring model and write example catheters.
    Simulate(SimulateArgs),
    /// Render a synthetic volume with gold centerlines and seeds.
    Phantom(PhantomArgs),
    /// Segment every seeded catheter in a volume.
    Segment(SegmentArgs),
    /// Score segmented trajectories against gold centerlines.
    Evaluate(EvaluateArgs),
    /// Generate the standard benchmark and run all three experiments.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Spring parameters as JSON (`k_a`, `n_seg`, `total_length`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub k_a: Option<f64>,
    #[arg(long)]
    pub n_seg: Option<usize>,
    #[arg(long)]
    pub length: Option<f64>,
    /// Number of example catheters, evenly spaced in force from zero to the table maximum.
    #[arg(long, default_value_t = 11)]
    pub forces: usize,
    #[arg(long, default_value_t = 200)]
    pub f_samples: usize,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// Phantom description as JSON.
    #[arg(long, required_unless_present = "template")]
    pub spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "template")]
    pub out_dir: Option<PathBuf>,
    /// Print an example spec and exit.
    #[arg(long, conflicts_with_all = ["spec", "out_dir"])]
    pub template: bool,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    /// Segmentation config as JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gate tolerance: `0` model only, `inf` image only, or mm.
    #[arg(long, value_parser = parse_tolerance)]
    pub dtol: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Catheters segmented in parallel; all cores when unset.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Deflection from the literal sine-of-arccos form.
    #[arg(long)]
    pub eq4_literal: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory of gold `catheter_XXX.json` centerlines.
    #[arg(long)]
    pub gold: PathBuf,
    /// Output directory of a `segment` run; repeat to compare experiments.
    #[arg(long, required = true)]
    pub segmented: Vec<PathBuf>,
    /// Experiment label when a run has no manifest to infer it from.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = cathseg::eval::DEFAULT_RESAMPLE_STEP)]
    pub resample_step: f64,
    /// Also write plottable polylines to `overlay.json`.
    #[arg(long)]
    pub overlay: bool,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hybrid gate tolerance in mm.
    #[arg(long, value_parser = parse_tolerance)]
    pub dtol: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub overlay: bool,
    /// Also write every benchmark volume, its seeds and gold centerlines.
    #[arg(long)]
    pub export_phantoms: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Phantom(a) => commands::phantom(&a),
        Command::Segment(a) => commands::segment(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cathseg: {f}");
            f.exit_code()
        }
    }
}
