//! `relfuse`: synthesize, track, evaluate and decode pose-relation data.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 input invariant, 5 solver.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relfuse::{FrameRate, WeightFamily, WeightSpec};

#[derive(Debug, Parser)]
#[command(name = "relfuse", version, about = "Pose tracking with spatial and temporal joint relations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a ground-truth sequence and a noisy tracking problem.
    Synth(SynthCmd),
    /// Solve a tracking problem, or run a seeded batch.
    Track(TrackCmd),
    /// Compute error metrics of a predicted sequence against ground truth.
    Eval(EvalCmd),
    /// Decode relation maps into relation vectors.
    Decode(DecodeCmd),
}

fn parse_frame_rate(s: &str) -> Result<FrameRate, String> {
    s.parse().map_err(|e: relfuse::synth::SynthError| e.to_string())
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

/// Motion and noise settings shared by `synth` and batch `track`.
#[derive(Debug, Clone, Args)]
pub struct MotionArgs {
    /// Joint tree: chain:N, star:N or human17.
    #[arg(long, default_value = "human17")]
    pub joints: String,
    /// Number of frames.
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    /// Frame-rate tag, one of {25, 8, 2.5}.
    #[arg(long, default_value = "8", value_parser = parse_frame_rate)]
    pub fps: FrameRate,
    /// Coordinate dimension, 2 or 3.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub dims: u8,
    /// Range of angular swing per bone in radians, LO,HI.
    #[arg(long, value_parser = parse_pair)]
    pub amplitude: Option<(f64, f64)>,
    /// Peak root translation per axis, mm.
    #[arg(long)]
    pub root_travel: Option<f64>,
    /// Std. dev. of single-frame joint noise, mm.
    #[arg(long, default_value_t = 20.0)]
    pub sigma_single: f64,
    /// Std. dev. of bone-vector noise, mm.
    #[arg(long, default_value_t = 5.0)]
    pub sigma_bone: f64,
    /// Std. dev. of displacement noise, mm.
    #[arg(long, default_value_t = 5.0)]
    pub sigma_displ: f64,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub motion: MotionArgs,
    /// Seed for the prediction noise; defaults to --seed.
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Durations to synthesize displacements for: a preset (f, fb, mf, mfb) or a list such as 1,-1,2.
    #[arg(long, default_value = "mfb", allow_hyphen_values = true)]
    pub durations: String,
    /// Bone-term weight stored in the problem file.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Per-duration weights stored in the problem file (default 1 each).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Option<Vec<f64>>,
    /// Ground-truth sequence output.
    #[arg(long)]
    pub out: PathBuf,
    /// Problem output; defaults to <out stem>.problem.json.
    #[arg(long)]
    pub problem_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrackCmd {
    /// Problem file to solve. Not used with --seeds.
    #[arg(long, required_unless_present = "seeds")]
    pub problem: Option<PathBuf>,
    /// Duration preset: f, fb, mf, mfb or custom. Batch mode accepts a comma list.
    #[arg(long, value_delimiter = ',')]
    pub preset: Vec<String>,
    /// Explicit durations for --preset custom, e.g. 1,-1,4.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub durations: Option<Vec<i32>>,
    /// Bone-term weight.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Per-duration weights, aligned with the duration set.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gamma: Option<Vec<f64>>,
    /// Tracked sequence output; in batch mode, the per-seed CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Run report (JSON). Printed to stdout as well.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Ground truth, adds joint errors to the report.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Batch mode: seed range a..b (inclusive) of synthesized problems.
    #[arg(long)]
    pub seeds: Option<String>,
    #[command(flatten, next_help_heading = "Batch synthesis")]
    pub motion: MotionArgs,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Predicted sequence.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth sequence.
    #[arg(long)]
    pub gt: PathBuf,
    /// Metric report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Metric report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// PCF curve as threshold_mm,fraction CSV.
    #[arg(long)]
    pub pcf: Option<PathBuf>,
    /// PCF thresholds in mm: START:STOP:STEP or a comma list.
    #[arg(long, default_value = "0:80:5")]
    pub thresholds: String,
    /// Problem file whose displacement predictions are scored against --gt.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Duration of the displacement block scored with --problem.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub duration: i32,
}

fn parse_weight_family(s: &str) -> Result<WeightFamily, String> {
    s.parse()
}

fn parse_weight_spec(s: &str) -> Result<WeightSpec, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct DecodeCmd {
    /// Relation-map file.
    #[arg(long)]
    pub maps: PathBuf,
    /// Decay family: binary, gaussian, linear, exponential, joint-one or full.
    #[arg(long, value_parser = parse_weight_family, conflicts_with = "ensemble")]
    pub family: Option<WeightFamily>,
    /// Decay rate for --family.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Ensemble of weight specs averaged together, e.g. binary:5,gaussian:0.01.
    #[arg(long, value_delimiter = ',', value_parser = parse_weight_spec)]
    pub ensemble: Option<Vec<WeightSpec>>,
    /// Decoded relations output.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(c) => commands::synth(&c),
        Command::Track(c) => commands::track(&c),
        Command::Eval(c) => commands::eval(&c),
        Command::Decode(c) => commands::decode(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relfuse: {e}");
            e.exit_code()
        }
    }
}
