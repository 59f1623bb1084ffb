//! Travelling-wave simulator and eavesdropping toolkit for resistor-noise
//! key exchange over lossy transmission lines.
//!
//! Two parties agree on key bits by terminating a shared line with one of
//! two resistor values each and exchanging Johnson-like band-limited noise.
//! On an ideal lossless line the two directional wave powers carry no
//! information about which end holds which resistor. This crate models the
//! link as right- and left-travelling waves with a one-way amplitude loss,
//! and shows that any loss at all breaks the symmetry: an eavesdropper who
//! separates the two wave directions and compares their joint statistics
//! can recover the resistor assignment — and with it the key bit.
//!
//! The pipeline is organised in layers, each usable on its own:
//!
//! - [`noise`]: reproducible band-limited Gaussian noise with exact power.
//! - [`line`]: steady-state directional waves of a terminated lossy line,
//!   their closed-form covariance, and full exchange simulation.
//! - [`probe`]: a passive two-tap direction-separating probe — adaptive
//!   calibration, decomposition, wave-domain restoration, and reflectometer
//!   and frequency-response diagnostics.
//! - [`detector`]: the bivariate Gaussian maximum-likelihood decision
//!   between the two resistor assignments.
//! - [`harness`]: reproducible desk-scale experiments sweeping line loss
//!   and averaging time, reporting bit error rates, statistic histograms,
//!   probe validation, and covariance checks as CSV or JSON.
//!
//! The crate ships a `wavetap` binary exposing the harness as subcommands
//! (`ber`, `llr-hist`, `probe-validate`, `cov-check`).
//!
//! # Example
//!
//! ```
//! use wavetap::harness::ber::run_ber_experiment;
//! use wavetap::harness::config::ExperimentConfig;
//!
//! let config = ExperimentConfig {
//!     losses_db: vec![0.1],
//!     averaging_times: vec![50],
//!     trials: 200,
//!     ..ExperimentConfig::default()
//! };
//! let points = run_ber_experiment(&config).unwrap();
//! // A lossy line leaks: the eavesdropper is well below the 50% coin-flip.
//! assert!(points[0].ber < 0.25);
//! ```

pub mod detector;
pub mod error;
pub mod harness;
pub mod line;
pub mod noise;
pub mod probe;

pub use error::{Error, Result};
