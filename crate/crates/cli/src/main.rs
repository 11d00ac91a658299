//! `fluxcad`: command-line front end for the tunable-cavity design toolkit.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 request outside the model's domain.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fluxcad::{ErrorClass, Flavor};

#[derive(Debug, Parser)]
#[command(
    name = "fluxcad",
    version,
    about = "Design and analysis tools for rf-SQUID tunable cavities and phase qubits"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Built-in design preset.
    #[arg(long, global = true, value_enum, ignore_case = true, conflicts_with = "config")]
    pub design: Option<DesignName>,
    /// Design file (TOML, see README for the grammar).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent. A manifest is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for anything random (synthetic noise).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of sweep points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignName {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Cavity,
    Qubit,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Cavity => Flavor::Cavity,
            FlavorArg::Qubit => Flavor::Qubit,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plasma frequency of every stable branch across a flux sweep.
    Spectrum(SpectrumArgs),
    /// Inductive coupling 2g versus cavity frequency, with capacitive references.
    Couple(CoupleArgs),
    /// Purcell, bias-line and dielectric decay over a qubit frequency sweep.
    Budget(BudgetArgs),
    /// Cavity flux that best separates the two qubit flux states.
    ReadoutOpt(ReadoutOptArgs),
    /// Two- and three-level dispersive shift along the qubit branch.
    Chi(ChiArgs),
    /// Evaluate a flux schedule, with its static counterpart.
    Schedule(ScheduleArgs),
    /// Fit circuit parameters to a spectroscopy sweep.
    Fit(FitArgs),
    /// Flux period and offset from a sweep spanning several periods.
    Calibrate(CalibrateArgs),
    /// Fit the notch line shape to an |S21| trace.
    Lineshape(LineshapeArgs),
    /// Rabi decay time from T1 and T2, or T2 from the Rabi decay time.
    Coherence(CoherenceArgs),
    /// Print a design file, to start a custom design from.
    Preset,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_enum, default_value = "cavity")]
    pub flavor: FlavorArg,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub phi_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub phi_max: f64,
    /// Gaussian noise added to each frequency, MHz.
    #[arg(long = "noise-MHz", default_value_t = 0.0)]
    pub noise_mhz: f64,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    /// Defaults to the cavity tuning band.
    #[arg(long = "fc-min-GHz")]
    pub fc_min: Option<f64>,
    #[arg(long = "fc-max-GHz")]
    pub fc_max: Option<f64>,
    /// Coupling capacitors for the capacitive reference columns, fF.
    #[arg(long = "cap-fF", value_delimiter = ',', default_values_t = [5.0, 15.0])]
    pub cap_ff: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Cavity frequency.
    #[arg(long = "fc-GHz")]
    pub fc: f64,
    /// Override κ/2π; default is the tabulated value near fc, else ω_c/Q_c.
    #[arg(long = "kappa-MHz")]
    pub kappa: Option<f64>,
    /// Override 2g/2π; default is the tabulated value near fc, else the circuit formula.
    #[arg(long = "two-g-MHz")]
    pub two_g: Option<f64>,
    /// Qubit sweep range; defaults to the design's qubit band.
    #[arg(long = "f01-min-GHz")]
    pub f01_min: Option<f64>,
    #[arg(long = "f01-max-GHz")]
    pub f01_max: Option<f64>,
    /// Dielectric quality factor; default from the design.
    #[arg(long)]
    pub qd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReadoutOptArgs {
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub phi_q: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_c_min: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub phi_c_max: f64,
    /// Measured dips: columns phi_c, depth_linear, width_Hz.
    #[arg(long)]
    pub dips: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChiArgs {
    #[arg(long = "fc-GHz")]
    pub fc: f64,
    #[arg(long = "two-g-MHz")]
    pub two_g: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_q_min: f64,
    #[arg(long, default_value_t = 0.64, allow_negative_numbers = true)]
    pub phi_q_max: f64,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Schedule file (TOML).
    #[arg(long)]
    pub schedule: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep CSV: bias or phi, freq_GHz, optional sigma_GHz and branch_id.
    #[arg(long)]
    pub sweep: PathBuf,
    #[arg(long, value_enum, default_value = "cavity")]
    pub flavor: FlavorArg,
    /// Free parameters, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "critical_current_cavity,series_inductance")]
    pub free: Vec<String>,
    /// Each free parameter may move by this factor either way.
    #[arg(long, default_value_t = 2.0)]
    pub bound_factor: f64,
    /// Initial flux axis: φ = (bias − offset) / period.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset: f64,
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    /// Also write per-point residuals here.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub sweep: PathBuf,
    #[arg(long, value_enum, default_value = "cavity")]
    pub flavor: FlavorArg,
}

#[derive(Debug, Args)]
pub struct LineshapeArgs {
    /// Trace CSV: freq_GHz, s21_mag.
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    #[arg(long = "t1-ns", default_value_t = 600.0)]
    pub t1: f64,
    #[arg(long = "t2-ns", conflicts_with = "t_prime")]
    pub t2: Option<f64>,
    /// Solve for T2 from a measured Rabi decay time instead.
    #[arg(long = "t-prime-ns")]
    pub t_prime: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<fluxcad::Error>() {
            return match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::ModelDomain => 4,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = commands::configure_threads() {
        eprintln!("fluxcad: {e:#}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fluxcad: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
