//! `qpm`: quasi-phasematching design and SHG simulation from the command line.
//!
//! Units at the boundary: nm for wavelengths, °C for temperatures, μm for
//! periods and tiles, mm for lengths, m⁻¹ for mismatches.

mod commands;
mod crystal;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpm_core::{Process, QpmError};

#[derive(Debug, Parser)]
#[command(
    name = "qpm",
    version,
    about = "Quasi-phasematched crystal design and SHG tuning curves"
)]
pub struct Cli {
    /// Dispersion coefficient set [default: the crystal file's choice, else
    /// `default`].
    #[arg(long, global = true)]
    pub coeff_set: Option<String>,

    /// Thermal expansion set [default: the crystal file's choice, else
    /// `ktp-x`].
    #[arg(long, global = true)]
    pub expansion_set: Option<String>,

    /// Alternative coefficient data file (defaults to the bundled one).
    #[arg(long, global = true)]
    pub coeff_file: Option<PathBuf>,

    /// Write the main output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProcessArg {
    Zzz,
    Zyy,
    Yzy,
    Yyz,
}

impl From<ProcessArg> for Process {
    fn from(p: ProcessArg) -> Self {
        match p {
            ProcessArg::Zzz => Process::Zzz,
            ProcessArg::Zyy => Process::Zyy,
            ProcessArg::Yzy => Process::Yzy,
            ProcessArg::Yyz => Process::Yyz,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariableArg {
    Temperature,
    Wavelength,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisArg {
    /// k1 = dk1 + dk2, k2 = dk2 (two targets).
    Sum,
    /// Integer search up to --max-order.
    Search,
}

/// Where a structure comes from.
#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Design file written by `design`.
    #[arg(long, conflicts_with_all = ["crystal", "period_um"])]
    pub design: Option<PathBuf>,

    /// Crystal description file.
    #[arg(long, conflicts_with = "period_um")]
    pub crystal: Option<PathBuf>,

    /// Channel of the crystal (required when it has several).
    #[arg(long, requires = "crystal")]
    pub channel: Option<String>,

    /// Periodic grating period.
    #[arg(long)]
    pub period_um: Option<f64>,

    /// Periodic grating duty cycle.
    #[arg(long, default_value_t = 0.5, requires = "period_um")]
    pub duty: f64,

    /// Periodic grating length.
    #[arg(long, default_value_t = 5.0)]
    pub length_mm: f64,

    /// Periodic grating phase offset, fraction of a period.
    #[arg(long, default_value_t = 0.0, requires = "period_um")]
    pub offset: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase mismatch and first-order period of a process.
    Mismatch {
        #[arg(long, value_enum)]
        process: ProcessArg,
        #[arg(long, default_value_t = 1560.0)]
        lambda_nm: f64,
        #[arg(long, default_value_t = 25.0)]
        temp_c: f64,
        /// Use the two-point type-II calibration for YZY/YYZ.
        #[arg(long)]
        calibrated: bool,
    },
    /// Mismatch slope and extrapolation from two QPM temperatures.
    Calibrate {
        /// Calibration point `T_C:dk_per_m`; give exactly two (defaults to
        /// the reference type-II pair).
        #[arg(long = "point", num_args = 1)]
        points: Vec<String>,
        /// Temperature to extrapolate to.
        #[arg(long, default_value_t = 40.0)]
        at_c: f64,
        /// Ignore thermal expansion of the grating.
        #[arg(long)]
        rigid: bool,
    },
    /// Synthesize a (quasi)periodic design for one to three targets.
    Design {
        /// Target mismatches in m⁻¹, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<f64>,
        /// Effective couplings in pm/V, one per target.
        #[arg(long, value_delimiter = ',')]
        couplings: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        length_mm: f64,
        /// Fixed tile split; the remainder goes to the last family. Skips
        /// the optimization.
        #[arg(long, value_delimiter = ',')]
        split: Vec<f64>,
        /// Tile duties (fraction of +χ⁽²⁾ per family).
        #[arg(long, value_delimiter = ',')]
        duties: Vec<f64>,
        /// Grid phases per family.
        #[arg(long, value_delimiter = ',')]
        phases: Vec<f64>,
        #[arg(long, value_enum)]
        basis: Option<BasisArg>,
        #[arg(long, default_value_t = 1)]
        max_order: u32,
        /// Split grid step of the optimizer.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Print the domain sequence of a structure.
    Render {
        #[command(flatten)]
        structure: StructureArgs,
    },
    /// Fourier coefficients of a structure.
    Fourier {
        #[command(flatten)]
        structure: StructureArgs,
        /// Spatial frequencies in m⁻¹ (defaults to the design targets).
        #[arg(long, value_delimiter = ',')]
        k: Vec<f64>,
    },
    /// SHG tuning curve of every channel of a crystal, as CSV.
    Sweep {
        #[arg(long)]
        crystal: PathBuf,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long, value_enum)]
        process: ProcessArg,
        #[arg(long, value_enum, default_value = "temperature")]
        variable: VariableArg,
        /// Lower end (°C or nm).
        #[arg(long, allow_negative_numbers = true)]
        min: f64,
        /// Upper end (°C or nm).
        #[arg(long)]
        max: f64,
        /// Step (°C or nm); defaults to 0.25 °C / 0.05 nm.
        #[arg(long)]
        step: Option<f64>,
        /// Fixed wavelength for temperature sweeps.
        #[arg(long, default_value_t = 1560.0)]
        lambda_nm: f64,
        /// Fixed temperature for wavelength sweeps.
        #[arg(long, default_value_t = 25.0)]
        temp_c: f64,
        #[arg(long)]
        calibrated: bool,
    },
    /// Summary of a crystal: coefficients, peaks, bandwidths, ratios.
    Report {
        #[arg(long)]
        crystal: PathBuf,
        #[arg(long, default_value_t = 1560.0)]
        lambda_nm: f64,
        /// Temperature window scanned for peaks.
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        t_min: f64,
        #[arg(long, default_value_t = 65.0)]
        t_max: f64,
        #[arg(long)]
        calibrated: bool,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<QpmError>() {
            return match e {
                QpmError::Config(_) | QpmError::Parse(_) | QpmError::UnknownSet(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
