use std::path::PathBuf;
use std::process::ExitCode;

use atomtrace::units::{parse_quantity, Dim};
use atomtrace::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod runs;

#[derive(Parser, Debug)]
#[command(name = "atomtrace", version, about = "Simulate and analyse single-atom cavity transit photon streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a run and write both detector streams plus a ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Build the cross-correlogram of two detector streams.
    Correlate(CorrelateArgs),
    /// Fit the transit model to a correlogram.
    Fit(FitArgs),
    /// Estimate detected photons per atom from count statistics.
    Mandel(MandelArgs),
    /// Compare coincidences with and without atoms over a gate grid.
    Fidelity(FidelityArgs),
    /// Simulate, correlate and fit over a list of drive strengths.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct RunOptions {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration, e.g. 300, 300s or 500ms.
    #[arg(long, value_parser = time)]
    duration: Option<f64>,
    /// Output directory.
    #[arg(long, env = "ATOMTRACE_OUT_DIR")]
    out: Option<PathBuf>,
    /// Stream file format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Drive strength Y = <n>/n0; overrides the configuration.
    #[arg(long)]
    drive_y: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunOptions,
    /// Atom flux in atoms/s; 0 simulates a background-only run.
    #[arg(long, value_parser = rate)]
    flux: Option<f64>,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    /// Stream file of channel 0.
    ch0: PathBuf,
    /// Stream file of channel 1.
    ch1: PathBuf,
    #[arg(long, default_value = "10ns", value_parser = time)]
    bin_width: f64,
    #[arg(long, default_value = "10us", value_parser = time)]
    max_lag: f64,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Correlogram CSV from `correlate`.
    correlogram: PathBuf,
    /// Background-to-signal rate ratio R_b/R_s.
    #[arg(long, conflicts_with_all = ["with", "without"])]
    bg_to_signal: Option<f64>,
    /// Run directory with atoms, used with --without to measure R_b/R_s.
    #[arg(long, requires = "without")]
    with: Option<PathBuf>,
    /// Background-only run directory.
    #[arg(long, requires = "with")]
    without: Option<PathBuf>,
    /// Configuration supplying γ_tot and the drive strength.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    drive_y: Option<f64>,
    #[arg(long, default_value = "50ns", value_parser = time)]
    exclusion: f64,
    #[arg(long, default_value = "5us", value_parser = time)]
    fit_span: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MandelArgs {
    /// Stream files; all events are merged into one stream.
    #[arg(required = true)]
    streams: Vec<PathBuf>,
    #[arg(long, default_value = "50us", value_parser = time)]
    from: f64,
    #[arg(long, default_value = "100us", value_parser = time)]
    to: f64,
    #[arg(long, default_value_t = 11)]
    steps: usize,
    /// Lowest mean count per bin included in the line fit.
    #[arg(long, default_value_t = 0.0)]
    fit_min: f64,
    /// Highest mean count per bin included in the line fit.
    #[arg(long, default_value_t = f64::INFINITY)]
    fit_max: f64,
    #[arg(long, default_value_t = 100)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FidelityArgs {
    /// Run directory with atoms.
    #[arg(long)]
    with: PathBuf,
    /// Background-only run directory.
    #[arg(long)]
    without: PathBuf,
    /// Gate lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1us,0.5us,1us,2us,5us", value_parser = time)]
    gates: Vec<f64>,
    /// Coincidence order for the k-fold signal-to-background column.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunOptions,
    /// Drive strengths Y = <n>/n0, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.24,0.5,1,2")]
    drives: Vec<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Binary,
    Csv,
}

fn time(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dim::Time).map_err(|e| e.to_string())
}

fn rate(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dim::Rate).map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
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
        Command::Simulate(a) => commands::simulate(&a),
        Command::Correlate(a) => commands::correlate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Mandel(a) => commands::mandel(&a),
        Command::Fidelity(a) => commands::fidelity(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
