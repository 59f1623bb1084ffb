//! Experiment configuration: the full parameter set of a desk-scale run,
//! loadable from a flat key/value TOML file.

use std::path::Path;
use std::str::FromStr;

use crate::detector::Hypothesis;
use crate::error::{Error, Result};
use crate::line::LineConfig;
use crate::noise::BandSpec;

use super::NOISE_SCALE;

/// How observations are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Draw observation pairs directly from the closed-form wave covariance.
    Analytic,
    /// Run the full signal chain: simulated exchange, tap synthesis,
    /// calibrated decomposition, wave-domain restoration, decimation.
    Probe,
}

impl Mode {
    /// Stable lowercase name used in files and on the command line.
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::Probe => "probe",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "probe" => Ok(Mode::Probe),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected \"analytic\" or \"probe\""
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Complete description of one experiment run.
///
/// The configuration file is a flat TOML document whose keys mirror these
/// fields exactly; unknown keys are rejected so that typos cannot silently
/// fall back to defaults.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Low key resistor in ohms.
    pub r_low: f64,
    /// High key resistor in ohms.
    pub r_high: f64,
    /// Line characteristic impedance in ohms.
    pub z0: f64,
    /// One-way line losses to sweep, in decibels.
    pub losses_db: Vec<f64>,
    /// Sample rate of generated signals in hertz.
    pub sample_rate: f64,
    /// Lower edge of the source band in hertz.
    pub f_low: f64,
    /// Upper edge of the source band in hertz.
    pub f_high: f64,
    /// Averaging times to sweep, in units of the band's correlation time
    /// (equivalently: statistically independent pairs per decision).
    pub averaging_times: Vec<usize>,
    /// Monte-Carlo decisions per grid point.
    pub trials: usize,
    /// Root seed; every random quantity in a run derives from it.
    pub seed: u64,
    /// Observation mode.
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            r_low: 1_000.0,
            r_high: 10_000.0,
            z0: 50.0,
            losses_db: vec![0.01, 0.1, 1.0],
            sample_rate: 50_000.0,
            f_low: 500.0,
            f_high: 5_500.0,
            averaging_times: vec![1, 2, 5, 10, 20, 50, 100],
            trials: 100_000,
            seed: 0,
            mode: Mode::Analytic,
        }
    }
}

impl ExperimentConfig {
    /// Parses a configuration from TOML text and validates it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|err| Error::Config(err.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            Error::Config(format!("cannot read {}: {err}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks the whole parameter set for consistency.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("r_low", self.r_low),
            ("r_high", self.r_high),
            ("z0", self.z0),
            ("sample_rate", self.sample_rate),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.r_low >= self.r_high {
            return Err(Error::Config(format!(
                "r_low must be smaller than r_high, got {} and {}",
                self.r_low, self.r_high
            )));
        }
        if !self.f_low.is_finite() || self.f_low < 0.0 {
            return Err(Error::Config(format!(
                "f_low must be non-negative and finite, got {}",
                self.f_low
            )));
        }
        if !self.f_high.is_finite() || self.f_high <= self.f_low {
            return Err(Error::Config(format!(
                "f_high must exceed f_low, got {} and {}",
                self.f_low, self.f_high
            )));
        }
        if self.f_high > self.sample_rate / 2.0 {
            return Err(Error::Config(format!(
                "f_high {} exceeds the Nyquist frequency {}",
                self.f_high,
                self.sample_rate / 2.0
            )));
        }
        if self.losses_db.is_empty() {
            return Err(Error::Config("losses_db must not be empty".to_string()));
        }
        if let Some(bad) = self
            .losses_db
            .iter()
            .find(|l| !l.is_finite() || **l < 0.0)
        {
            return Err(Error::Config(format!(
                "losses_db entries must be non-negative and finite, got {bad}"
            )));
        }
        if self.averaging_times.is_empty() {
            return Err(Error::Config(
                "averaging_times must not be empty".to_string(),
            ));
        }
        if self.averaging_times.contains(&0) {
            return Err(Error::Config(
                "averaging_times entries must be at least 1".to_string(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Band specification for a stream of `n_samples` samples.
    pub fn band(&self, n_samples: usize) -> Result<BandSpec> {
        BandSpec::new(self.sample_rate, self.f_low, self.f_high, n_samples)
    }

    /// Samples per correlation time of the source band, the decimation step
    /// that spaces observation pairs one correlation time apart.
    pub fn correlation_step(&self) -> usize {
        ((self.sample_rate / (self.f_high - self.f_low)).round() as usize).max(1)
    }

    /// Line configuration realising a hypothesis at transmission `alpha`.
    pub fn line_config(&self, hypothesis: Hypothesis, alpha: f64) -> LineConfig {
        let (r_alice, r_bob) = match hypothesis {
            Hypothesis::C0 => (self.r_high, self.r_low),
            Hypothesis::C1 => (self.r_low, self.r_high),
        };
        LineConfig {
            r_alice,
            r_bob,
            z0: self.z0,
            alpha,
            noise_scale: NOISE_SCALE,
        }
    }
}
