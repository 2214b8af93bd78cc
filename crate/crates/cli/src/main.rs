//! `platoon`: design, simulate and audit shaped platoons from JSON configs.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 design infeasibility
//! (including an infeasible merge), 4 simulation abort. Failures print one
//! JSON object on stderr with the machine-readable `reason`.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "platoon",
    version,
    about = "Space-domain platoon traffic shaping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. PLATOON_OUT takes precedence when set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fixed gamma instead of the configured or optimized one.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Grid step in metres.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Reserved: nothing is stochastic yet. Recorded in the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write every n-th grid point to the trace and profile CSVs.
    #[arg(long, global = true, default_value_t = 1)]
    stride: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the safe time-gap curve.
    SafetyCurve(SafetyCurveArgs),
    /// Design (and optionally optimize) the shaping profile.
    Design,
    /// Run the closed-loop platoon simulation.
    Simulate(SimulateArgs),
    /// Check a substream merge against a simulated mainstream.
    AuditMerge(AuditArgs),
    /// Simulate a config over a list of values of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SafetyArgs {
    #[arg(long)]
    vehicle_length: Option<f64>,
    #[arg(long)]
    a_min: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SafetyCurveArgs {
    #[command(flatten)]
    safety: SafetyArgs,
    #[arg(long, default_value_t = 2.0)]
    v_min: f64,
    #[arg(long, default_value_t = 30.0)]
    v_max: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Time step of the reconstructed trajectories, seconds.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    /// One vehicle in the middle of each gap behind a sub-platoon.
    Centered,
    /// One vehicle `--offset` seconds behind each sub-platoon tail.
    Offset,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Mainstream trace CSV written by `simulate`.
    #[arg(long)]
    trace: PathBuf,
    /// Substream passage times at the merge location.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "pattern"
    )]
    times: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pattern: Option<Pattern>,
    #[arg(long, required_if_eq("pattern", "offset"))]
    offset: Option<f64>,
    /// Merged velocity; defaults to the mainstream's downstream velocity.
    #[arg(long)]
    velocity: Option<f64>,
    #[command(flatten)]
    safety: SafetyArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Gamma,
    Tau0,
    TauOddEnd,
    H,
    P,
    P0,
    P1,
    Count,
    LeadError,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    param: SweepParam,
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    values: Vec<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    sim: SimulateArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SafetyCurve(args) => commands::safety_curve(&cli.common, args),
        Command::Design => commands::design(&cli.common),
        Command::Simulate(args) => commands::simulate(&cli.common, args),
        Command::AuditMerge(args) => commands::audit_merge(&cli.common, args),
        Command::Sweep(args) => commands::sweep(&cli.common, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}

impl From<platoon::Error> for CliError {
    fn from(e: platoon::Error) -> Self {
        CliError::Core(e)
    }
}
