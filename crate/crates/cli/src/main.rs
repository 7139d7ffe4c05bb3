//! `stiffcal`: batch front end for compensator geometry identification,
//! elastostatic calibration, plan design, simulation and prediction.

mod commands;
mod files;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stiffcal", version, about = "Elastostatic calibration of robots with a joint-2 spring compensator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identify compensator geometry (L, a_x, a_y) from tracker data
    GeomIdent(GeomIdentArgs),
    /// Identify joint compliances and compensator parameters from deflection records
    ElastoIdent(ElastoIdentArgs),
    /// Optimize a calibration plan
    Doe(DoeArgs),
    /// Generate synthetic tracker data from a model file
    Simulate(SimulateArgs),
    /// Predict tool deflection and Cartesian stiffness under load
    Predict(PredictArgs),
    /// Tabulate the compensator coefficient eta(q2) for several s0
    EtaCurve(EtaCurveArgs),
}

#[derive(Debug, Args)]
pub struct GeomIdentArgs {
    /// Marker CSV (q2_deg, P1_x, P1_y, P01_x, ...)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ElastoIdentArgs {
    /// Deflection records CSV
    #[arg(long)]
    pub records: PathBuf,
    /// Model file (kinematics, markers, compensator)
    #[arg(long)]
    pub model: PathBuf,
    /// Compensator geometry from geom-ident; overrides the model's
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Joints to identify (1-based)
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    pub joints: Vec<usize>,
    /// q2 values closer than this share a joint-2 compliance
    #[arg(long, default_value_t = 0.1)]
    pub bucket_tol_deg: f64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DoeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Constraints file (TOML)
    #[arg(long)]
    pub constraints: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Geometry,
    Deflection,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimKind,
    /// Model file with a [compensator] block; holds the ground truth
    #[arg(long, default_value = "data/kr270_synthetic.toml")]
    pub model: PathBuf,
    /// Plan CSV (deflection only)
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// q2 angles of the geometry poses
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "0,-20,-40,-60,-80,-100,-120,-140"
    )]
    pub q2_deg: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Per-coordinate measurement noise
    #[arg(long, default_value_t = 0.05)]
    pub sigma_mm: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the linear observation model instead of the loaded equilibrium
    #[arg(long)]
    pub linear: bool,
    /// Leave link weights out of the equilibrium
    #[arg(long)]
    pub no_gravity: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Configurations and loads in plan CSV format
    #[arg(long, conflicts_with_all = ["q_deg", "wrench"])]
    pub loads: Option<PathBuf>,
    /// Single configuration, six joint angles
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "wrench")]
    pub q_deg: Option<Vec<f64>>,
    /// Single tool wrench: Fx,Fy,Fz (N), Mx,My,Mz (N·mm)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "q_deg")]
    pub wrench: Option<Vec<f64>>,
    #[arg(long)]
    pub no_gravity: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct EtaCurveArgs {
    /// Model file with a [compensator] block
    #[arg(long, required_unless_present = "geometry")]
    pub model: Option<PathBuf>,
    /// Geometry file from geom-ident
    #[arg(long, conflicts_with = "model")]
    pub geometry: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "400,458,500")]
    pub s0_mm: Vec<f64>,
    #[arg(long, allow_negative_numbers = true, default_value_t = -140.0)]
    pub q2_from_deg: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub q2_to_deg: f64,
    #[arg(long, default_value_t = 141)]
    pub points: usize,
    #[command(flatten)]
    pub output: Output,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<stiffcal::Error>())
        .any(stiffcal::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::GeomIdent(a) => commands::geom_ident(&a),
        Command::ElastoIdent(a) => commands::elasto_ident(&a),
        Command::Doe(a) => commands::doe(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::EtaCurve(a) => commands::eta_curve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
