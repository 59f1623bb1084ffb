//! Command-line front end for the experiment harness.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! validation subcommand ran but at least one check failed.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use wavetap::harness::ber::run_ber_experiment;
use wavetap::harness::config::ExperimentConfig;
use wavetap::harness::llr::run_llr_histogram;
use wavetap::harness::report::{
    ber_csv, covariance_csv, json_report, llr_csv, validation_csv, Format,
};
use wavetap::harness::validate::{run_covariance_check, run_probe_validation};
use wavetap::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wavetap",
    version,
    about = "Directional-wave eavesdropping experiments on resistor-noise key exchange",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat TOML configuration file; defaults describe the desk-scale setup.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configuration's root seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,

    /// Override the configuration's observation mode.
    #[arg(long, value_name = "MODE", value_parser = ["analytic", "probe"])]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep bit error rate over line loss and averaging time.
    Ber(CommonArgs),

    /// Histogram the detector statistic under both resistor assignments.
    #[command(name = "llr-hist")]
    LlrHist {
        #[command(flatten)]
        common: CommonArgs,

        /// Score the two wave components independently of each other
        /// (power-only baseline) instead of jointly.
        #[arg(long)]
        uncorrelated: bool,
    },

    /// Check the probe against known terminations, directions, and drives.
    #[command(name = "probe-validate")]
    ProbeValidate(CommonArgs),

    /// Compare simulated wave covariance with its closed form.
    #[command(name = "cov-check")]
    CovCheck(CommonArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests land here as well; they keep clap's
            // success status while genuine usage errors exit with 1.
            let code = i32::from(err.use_stderr());
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

/// Runs the selected subcommand; `Ok(false)` means a check failed.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ber(common) => {
            let config = load_config(&common)?;
            let points = run_ber_experiment(&config)?;
            let text = match format_of(&common)? {
                Format::Csv => ber_csv(&points),
                Format::Json => json_report("ber", &config, &points)?,
            };
            emit(&common, &text)?;
            Ok(true)
        }
        Command::LlrHist {
            common,
            uncorrelated,
        } => {
            let config = load_config(&common)?;
            let histograms = run_llr_histogram(&config, !uncorrelated)?;
            let text = match format_of(&common)? {
                Format::Csv => llr_csv(&histograms),
                Format::Json => json_report("llr-hist", &config, &histograms)?,
            };
            emit(&common, &text)?;
            Ok(true)
        }
        Command::ProbeValidate(common) => {
            let config = load_config(&common)?;
            let report = run_probe_validation(&config)?;
            let text = match format_of(&common)? {
                Format::Csv => validation_csv(&report),
                Format::Json => json_report("probe-validate", &config, &report)?,
            };
            emit(&common, &text)?;
            Ok(report.passed)
        }
        Command::CovCheck(common) => {
            let config = load_config(&common)?;
            let report = run_covariance_check(&config)?;
            let text = match format_of(&common)? {
                Format::Csv => covariance_csv(&report),
                Format::Json => json_report("cov-check", &config, &report)?,
            };
            emit(&common, &text)?;
            Ok(report.passed)
        }
    }
}

/// Loads the configuration file (or defaults) and applies flag overrides.
fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(mode) = &common.mode {
        config.mode = mode.parse()?;
    }
    config.validate()?;
    Ok(config)
}

fn format_of(common: &CommonArgs) -> Result<Format> {
    common.format.parse()
}

/// Writes the report to the requested destination.
fn emit(common: &CommonArgs, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|err| {
            Error::Config(format!("cannot write {}: {err}", path.display()))
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
