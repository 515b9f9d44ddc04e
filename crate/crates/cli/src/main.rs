//! `spikelab`: Emden tables, model spikes, grid solves and spike analysis
//! from the command line. Results go to stdout as JSON (or CSV where noted);
//! bulk artifacts go under `--out`.

mod commands;
mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "spikelab", version, about = "Numerical laboratory for plasma spikes in two dimensions")]
pub struct Cli {
    /// Directory for CSV tables, field dumps and experiment bundles.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Only report errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads. Pipelines currently run sequentially; values above 1 only warn.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Radial Emden profile on the unit disk and its integrals.
    Emden {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Also write the radial table `r,phi,dphi` to `<out>/emden_radial.csv`.
        #[arg(long)]
        table: bool,
    },
    /// Finite-mass entire solution with free-boundary radius `--radius`.
    Entire {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        radius: f64,
        /// Apply the rescaling operator with this factor.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Even one-dimensional solution with peak `--a`.
    Onedim {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Write `samples` rows `t,u` to `<out>/onedim.csv`.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Refined length scale `s` and amplification `θ` as CSV `eps,s,theta`.
    Scales {
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// Model spike on the unit-area disk.
    Profile {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        /// Write `samples` rows `r,U` to `<out>/profile.csv`.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Newton solves along a decreasing `ε` schedule; one JSON line per `ε`.
    Solve {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Initial spike centres `"x1,y1;x2,y2"`; defaults to the domain centre.
        #[arg(long, allow_hyphen_values = true)]
        spikes: Option<String>,
        /// Fixed number of cells along the reference length; adaptive if absent.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Field dump format written to `<out>/field_<k>.*`.
        #[arg(long, value_enum)]
        dump: Option<DumpFormat>,
    },
    /// Spike analysis of binary field dumps from `solve --dump bin`.
    Analyze {
        #[arg(long, num_args = 1.., required = true)]
        fields: Vec<PathBuf>,
        /// Comparison radius in units of `s·t`.
        #[arg(long, default_value_t = 2.0)]
        r_compare: f64,
        /// Roundness tolerance.
        #[arg(long, default_value_t = 0.25)]
        theta: f64,
    },
    /// Kirchhoff–Routh function, its gradient and optionally a critical point.
    Kr {
        #[command(flatten)]
        domain: DomainArgs,
        /// Points `"x1,y1;x2,y2"`.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        /// Masses `"M1;M2"`; all 1 when absent.
        #[arg(long)]
        masses: Option<String>,
        #[arg(long)]
        find_critical: bool,
    },
    /// Runs a JSON experiment config and writes its bundle to `--out` (default `.`).
    Experiment { config: PathBuf },
}

#[derive(Args, Debug, Clone)]
pub struct DomainArgs {
    #[arg(long, value_enum, default_value_t = DomainKind::Disk)]
    pub domain: DomainKind,
    /// Disk radius; the unit-area disk by default.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Rectangle sides; 2 × 1 by default.
    #[arg(long)]
    pub lx: Option<f64>,
    #[arg(long)]
    pub ly: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Disk,
    Rect,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Bin,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
