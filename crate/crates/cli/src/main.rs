use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod io;

use config::RunConfig;

/// Model, calibrate and invert omnidirectional eight-photodiode IR sensors.
///
/// Distances on the command line are in millimetres. Settings can come from
/// a JSON or TOML file passed with --config; flags override it.
#[derive(Parser, Debug)]
#[command(name = "omnisense", version)]
struct Cli {
    /// JSON or TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace an LED emission fan off a mirror profile.
    Trace(TraceArgs),
    /// Fit a response model to free-path (and optional post-path) sweeps.
    Calibrate(CalibrateArgs),
    /// Generate a sweep CSV from a model.
    Synthesize(SynthesizeArgs),
    /// Estimate distance and orientation for readouts.
    Localize(LocalizeArgs),
    /// Closed-loop MAE evaluation of one or two models.
    Evaluate(EvaluateArgs),
    /// Compare two MAE reports row by row.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct SweepArgs {
    /// Smallest sweep distance, mm.
    #[arg(long)]
    pub d_min: Option<f64>,
    /// Largest sweep distance, mm.
    #[arg(long)]
    pub d_max: Option<f64>,
    /// Distance step, mm.
    #[arg(long)]
    pub d_step: Option<f64>,
    /// Angular step in mm of arc at each distance.
    #[arg(long)]
    pub arc_step: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    /// vertical-stage1, vertical-stage2, flower, or a profile JSON file.
    #[arg(long)]
    pub profile: Option<String>,
    /// Fan half-angle, degrees.
    #[arg(long)]
    pub half_angle: Option<f64>,
    #[arg(long)]
    pub rays: Option<usize>,
    /// LED focal point height, mm.
    #[arg(long)]
    pub source_height_mm: Option<f64>,
    /// Height at which the reflected fan is measured, mm.
    #[arg(long)]
    pub receiver_height_mm: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Free-path sweep CSV.
    #[arg(long)]
    pub free: Option<PathBuf>,
    /// Post-path sweep CSV.
    #[arg(long)]
    pub post: Option<PathBuf>,
    /// Model JSON output (default: <out-dir>/model.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of orientation bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// How bin means are compared to the pseudo-Voigt: sample-average or center.
    #[arg(long)]
    pub bin_model: Option<String>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    /// Model JSON to sample.
    #[arg(long, conflicts_with = "design")]
    pub model: Option<PathBuf>,
    /// Use the built-in reference model for this design instead.
    #[arg(long)]
    pub design: Option<String>,
    /// free or post.
    #[arg(long, default_value = "free")]
    pub path: String,
    /// Noise σ as a fraction of the model's global peak.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mounting offset applied to every orientation, degrees.
    #[arg(long, default_value_t = 0.0)]
    pub rotation: f64,
    /// Output CSV (default: <out-dir>/sweep_<design>_<path>.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// One readout as eight comma-separated signals.
    #[arg(long, conflicts_with = "readouts", allow_hyphen_values = true)]
    pub readout: Option<String>,
    /// CSV of readouts.
    #[arg(long)]
    pub readouts: Option<PathBuf>,
    /// Write JSON lines here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model JSON used for inversion; give twice to compare two designs.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Model JSON that generates the readouts, one per --model (default: the model itself).
    #[arg(long = "truth")]
    pub truths: Vec<PathBuf>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report raw |θ̂ − θ| instead of the circular difference.
    #[arg(long)]
    pub raw_angles: bool,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// First MAE report JSON.
    #[arg(long)]
    pub a: PathBuf,
    /// Second MAE report JSON.
    #[arg(long)]
    pub b: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<omnisense::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        3
    } else {
        2
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.ends_with(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir;
    }
    match cli.command {
        Command::Trace(a) => commands::trace(&cfg, a),
        Command::Calibrate(a) => commands::calibrate(&cfg, a),
        Command::Synthesize(a) => commands::synthesize(&cfg, a),
        Command::Localize(a) => commands::localize(&cfg, a),
        Command::Evaluate(a) => commands::evaluate(&cfg, a),
        Command::Compare(a) => commands::compare(&cfg, a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
