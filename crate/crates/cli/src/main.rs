//! `optipace`: calibrate riders, solve for optimal pacing, replay plans and
//! compare runs.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "optipace", version, about = "Minimum-time pacing for cycling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate rider parameters from laboratory traces.
    Calibrate(CalibrateArgs),
    /// Compute the minimum-time power plan for a course.
    Solve(SolveArgs),
    /// Ride a course under a prescribed power plan.
    Simulate(SimulateArgs),
    /// Compare two run summaries on the same course.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// All-out test trace (`time_s,power_w,cadence_rpm`); repeat to average.
    #[arg(long = "trace", required = true)]
    pub traces: Vec<PathBuf>,
    /// Interval test: trace CSV followed by its segment file; repeatable.
    #[arg(long = "interval", num_args = 2, value_names = ["TRACE", "SEGMENTS"])]
    pub intervals: Vec<PathBuf>,
    /// Recovery powers within this many watts form one level.
    #[arg(long, default_value_t = 5.0)]
    pub level_tolerance: f64,
    /// Rider body mass, kg.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Output directory; receives `rider.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Rider parameter file.
    #[arg(long)]
    pub rider: PathBuf,
    /// Bike parameter file; defaults apply when omitted.
    #[arg(long)]
    pub bike: Option<PathBuf>,
    /// Course profile (`.csv` with `distance_m,elevation_m`, or `.gpx`).
    #[arg(long)]
    pub course: PathBuf,
    /// Course format; inferred from the extension when omitted.
    #[arg(long, value_parser = ["csv", "gpx"])]
    pub format: Option<String>,
    /// Moving-average window (points) applied to the elevation before use.
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Laboratory trainer dynamics: no drag, no downhill assist, 15.5 N resistance.
    #[arg(long)]
    pub computrainer: bool,
    /// Distance step, m.
    #[arg(long, default_value_t = 10.0)]
    pub ds: f64,
    /// Initial speed, m/s; defaults to the lowest grid speed.
    #[arg(long)]
    pub v0: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Velocity nodes.
    #[arg(long, default_value_t = 300)]
    pub nv: usize,
    /// Energy nodes.
    #[arg(long, default_value_t = 600)]
    pub nw: usize,
    /// Lowest grid speed, m/s.
    #[arg(long, default_value_t = 1.0)]
    pub vmin: f64,
    /// Highest grid speed, m/s.
    #[arg(long, default_value_t = 20.0)]
    pub vmax: f64,
    /// Seconds charged per change of mode.
    #[arg(long, default_value_t = 0.05)]
    pub reg: f64,
    /// Solve over a uniform grid of this many power levels instead of the four modes.
    #[arg(long)]
    pub dense_nu: Option<usize>,
    /// Write the policy and cost-to-go tables to this directory.
    #[arg(long)]
    pub dump_tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Power plan CSV keyed by `s_m` or `t_s`, with a `u_w` column.
    #[arg(long, required_unless_present = "halves", conflicts_with = "halves")]
    pub plan: Option<PathBuf>,
    /// Hold FIRST watts for half the ride time, then SECOND watts.
    #[arg(long, num_args = 2, value_names = ["FIRST", "SECOND"])]
    pub halves: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline summary JSON.
    pub baseline: PathBuf,
    /// Candidate summary JSON.
    pub candidate: PathBuf,
    /// Directory for `comparison.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<optipace_core::Error>() {
        Some(e) if !e.is_validation() => 3,
        Some(_) => 2,
        None => 1,
    }
}
