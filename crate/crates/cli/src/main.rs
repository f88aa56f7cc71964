//! Command-line front end: deterministic scan simulation, lineshape fitting
//! and run-level reporting.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::Overrides;
use ghostspec::Fidelity;

/// Errors with the process exit codes the shell contract promises:
/// 2 for configuration problems, 3 for runtime/fit failures.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ghostspec",
    about = "Virtual lab for coincidence-based ghost spectroscopy of a plasmonic Fano sensor",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the run seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (simulate, report) or file (fit).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the simulation fidelity.
    #[arg(long, global = true, value_parser = parse_fidelity)]
    fidelity: Option<Fidelity>,

    /// Override the per-repeat acquisition time in seconds.
    #[arg(long, global = true)]
    dwell: Option<f64>,

    /// Override the number of repeats per spectrum point.
    #[arg(long, global = true)]
    repeats: Option<u32>,

    /// Override the wavelength step in nm.
    #[arg(long, global = true)]
    step: Option<f64>,
}

fn parse_fidelity(s: &str) -> Result<Fidelity, String> {
    match s {
        "rate" => Ok(Fidelity::Rate),
        "event" => Ok(Fidelity::Event),
        other => Err(format!("unknown fidelity '{other}', expected rate or event")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured scans and write one normalized spectrum per
    /// (mode, analyte, noise level).
    Simulate {
        /// Experiment configuration file (TOML).
        config: PathBuf,
        /// Also write the raw array and substrate spectra.
        #[arg(long)]
        emit_raw: bool,
    },
    /// Fit spectra with the Fano lineshape and print a JSON report.
    Fit {
        /// Spectrum files (the .csv path or its stem).
        spectra: Vec<PathBuf>,
        /// Refractive-index change between exactly two spectra; adds a
        /// shift-and-sensitivity block to the report.
        #[arg(long)]
        delta_n: Option<f64>,
    },
    /// Summarize a simulate output directory: fitted minima, shifts,
    /// detectability and SNR ratios per (mode, noise level).
    Report {
        /// Directory written by `simulate`.
        run_dir: PathBuf,
    },
    /// Print the coincidence-rate decomposition and SNR comparison for a
    /// given operating point.
    Rates {
        /// In-band pair rate (pairs/s).
        #[arg(long, default_value_t = 2000.0)]
        p_inband: f64,
        /// Signal-channel efficiency.
        #[arg(long, default_value_t = 0.5)]
        eta_s: f64,
        /// Idler-channel efficiency.
        #[arg(long, default_value_t = 0.05)]
        eta_i: f64,
        /// Signal-channel noise rate (counts/s).
        #[arg(long, default_value_t = 1e3)]
        ns: f64,
        /// Idler-channel noise rate (counts/s).
        #[arg(long, default_value_t = 1e5)]
        ni: f64,
        /// Coincidence window width (s).
        #[arg(long, default_value_t = 5e-9)]
        dt: f64,
        /// Sample transmission at the probed wavelength.
        #[arg(long, default_value_t = 1.0)]
        transmission: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        fidelity: cli.fidelity,
        dwell_s: cli.dwell,
        repeats: cli.repeats,
        step_nm: cli.step,
    };
    let result = match cli.command {
        Command::Simulate { config, emit_raw } => {
            commands::simulate::run(&config, &overrides, cli.out.as_deref(), emit_raw)
        }
        Command::Fit { spectra, delta_n } => {
            commands::fit::run(&spectra, delta_n, cli.out.as_deref())
        }
        Command::Report { run_dir } => commands::report::run(&run_dir),
        Command::Rates { p_inband, eta_s, eta_i, ns, ni, dt, transmission } => {
            commands::rates::run(p_inband, eta_s, eta_i, ns, ni, dt, transmission)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
