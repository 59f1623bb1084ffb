//! Shared error type for generation, line modelling, probing, detection, and
//! the experiment harness.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Enumeration of everything that can go wrong in this crate.
#[derive(Debug)]
pub enum Error {
    /// A numeric parameter or specification failed validation.
    InvalidParameter(String),
    /// Two signals that must agree in length or sample rate do not.
    ShapeMismatch(String),
    /// The loop gain of the line makes the steady-state sum diverge.
    SingularConfiguration {
        /// Value of the vanishing denominator `1 - alpha^2 * gamma_a * gamma_b`.
        denominator: f64,
    },
    /// Adaptive calibration exhausted its sample budget without reaching the
    /// stopping threshold.
    CalibrationFailure {
        /// Residual directional coupling when the budget ran out.
        residual_gamma: f64,
    },
    /// An operation that requires a converged probe state was invoked with an
    /// unconverged one.
    NotCalibrated,
    /// Observed data produced a covariance that is not positive definite.
    DegenerateData(String),
    /// A reflection estimate was requested for a signal with no incident power.
    DegenerateMeasurement,
    /// A configuration file could not be parsed or contained invalid values.
    Config(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::SingularConfiguration { denominator } => write!(
                f,
                "singular line configuration: steady-state denominator {denominator:e} vanishes"
            ),
            Error::CalibrationFailure { residual_gamma } => write!(
                f,
                "calibration failed to converge: residual directional coupling {residual_gamma:e}"
            ),
            Error::NotCalibrated => {
                write!(f, "operation requires a converged probe calibration")
            }
            Error::DegenerateData(msg) => write!(f, "degenerate data: {msg}"),
            Error::DegenerateMeasurement => {
                write!(f, "degenerate measurement: incident wave carries no power")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
