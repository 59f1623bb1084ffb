//! Travelling-wave model of a lossy two-party noise key exchange link.
//!
//! Both parties terminate a transmission line of characteristic impedance
//! `z0` with a randomly chosen resistor and drive it with that resistor's
//! thermal noise. The line state is described by two directional waves:
//! `v_plus` travelling from port A toward port B and `v_minus` travelling
//! the opposite way, both referred to a common reference plane. Each port
//! reflects the wave arriving at it with coefficient
//! `gamma = (r - z0) / (r + z0)`, and one end-to-end traversal multiplies a
//! wave's amplitude by `alpha` (unity when lossless).
//!
//! Summing the infinite bounce series gives closed-form steady-state waves,
//! and from those a closed-form 2x2 covariance of `(v_plus, v_minus)` for
//! each resistor assignment. When `alpha < 1` that covariance is asymmetric
//! between the two resistor assignments, which is exactly the leak a
//! directional eavesdropper exploits.

use crate::error::{Error, Result};
use crate::noise::{derive_seed, generate_band_limited_noise, BandSpec, SampleStream};

/// Threshold below which the steady-state denominator is treated as zero.
const SINGULAR_EPS: f64 = 1e-12;

/// Physical description of one exchange configuration: the two terminating
/// resistors, the line impedance, per-traversal amplitude transmission, and
/// an overall noise power scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineConfig {
    /// Resistor at port A in ohms.
    pub r_alice: f64,
    /// Resistor at port B in ohms.
    pub r_bob: f64,
    /// Characteristic impedance of the line in ohms.
    pub z0: f64,
    /// Amplitude transmission for one end-to-end traversal, in `(0, 1]`.
    pub alpha: f64,
    /// Overall noise power scale; source variances are
    /// `4 * (r / z0) * noise_scale`.
    pub noise_scale: f64,
}

impl LineConfig {
    /// Creates a config and validates it.
    pub fn new(r_alice: f64, r_bob: f64, z0: f64, alpha: f64, noise_scale: f64) -> Result<Self> {
        let config = LineConfig {
            r_alice,
            r_bob,
            z0,
            alpha,
            noise_scale,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks that resistances, impedance, transmission, and scale are sane.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("r_alice", self.r_alice),
            ("r_bob", self.r_bob),
            ("z0", self.z0),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !self.noise_scale.is_finite() || self.noise_scale <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise_scale must be positive and finite, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

/// Reflection coefficients seen by waves arriving at the two ports.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReflectionPair {
    /// Reflection coefficient at port A.
    pub gamma_a: f64,
    /// Reflection coefficient at port B.
    pub gamma_b: f64,
}

impl ReflectionPair {
    /// Validates that both coefficients lie in the closed interval `[-1, 1]`.
    ///
    /// The boundary values represent ideal short and open terminations; they
    /// are admitted so that calibration fixtures can be described, but note
    /// that [`theoretical_covariance`] degenerates there.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("gamma_a", self.gamma_a), ("gamma_b", self.gamma_b)] {
            if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [-1, 1], got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// The two directional waves on the line, sampled on a common clock.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePair {
    /// Wave travelling from port A toward port B.
    pub v_plus: SampleStream,
    /// Wave travelling from port B toward port A.
    pub v_minus: SampleStream,
}

impl WavePair {
    /// Creates a pair after checking that both streams share length and rate.
    pub fn new(v_plus: SampleStream, v_minus: SampleStream) -> Result<Self> {
        if v_plus.len() != v_minus.len() {
            return Err(Error::ShapeMismatch(format!(
                "directional waves differ in length: {} vs {}",
                v_plus.len(),
                v_minus.len()
            )));
        }
        if v_plus.sample_rate != v_minus.sample_rate {
            return Err(Error::ShapeMismatch(format!(
                "directional waves differ in sample rate: {} vs {}",
                v_plus.sample_rate, v_minus.sample_rate
            )));
        }
        Ok(WavePair { v_plus, v_minus })
    }

    /// Number of samples in each wave.
    pub fn len(&self) -> usize {
        self.v_plus.len()
    }

    /// True when the pair holds no samples.
    pub fn is_empty(&self) -> bool {
        self.v_plus.is_empty()
    }

    /// Raw second-moment covariance of the two waves, treating them as
    /// zero-mean processes.
    pub fn empirical_covariance(&self) -> Result<Covariance2> {
        if self.is_empty() {
            return Err(Error::DegenerateData(
                "cannot estimate covariance from an empty wave pair".to_string(),
            ));
        }
        let n = self.len() as f64;
        let mut c_pp = 0.0;
        let mut c_mm = 0.0;
        let mut c_pm = 0.0;
        for (&p, &m) in self.v_plus.samples.iter().zip(&self.v_minus.samples) {
            c_pp += p * p;
            c_mm += m * m;
            c_pm += p * m;
        }
        Ok(Covariance2 {
            c_pp: c_pp / n,
            c_mm: c_mm / n,
            c_pm: c_pm / n,
        })
    }

    /// Extracts `count` simultaneous `(v_plus, v_minus)` pairs starting at
    /// sample `start` and stepping by `step` samples.
    ///
    /// Stepping by one correlation time of the generating band makes
    /// successive pairs effectively independent.
    pub fn decimated_pairs(
        &self,
        start: usize,
        step: usize,
        count: usize,
    ) -> Result<Vec<(f64, f64)>> {
        if step == 0 {
            return Err(Error::InvalidParameter(
                "decimation step must be positive".to_string(),
            ));
        }
        let needed = start + (count.max(1) - 1) * step + 1;
        if count == 0 || needed > self.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot take {count} pairs with start {start} and step {step} from {} samples",
                self.len()
            )));
        }
        Ok((0..count)
            .map(|i| {
                let idx = start + i * step;
                (self.v_plus.samples[idx], self.v_minus.samples[idx])
            })
            .collect())
    }
}

/// Closed-form or fitted covariance of `(v_plus, v_minus)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Covariance2 {
    /// Variance of `v_plus`.
    pub c_pp: f64,
    /// Variance of `v_minus`.
    pub c_mm: f64,
    /// Covariance between the two waves.
    pub c_pm: f64,
}

impl Covariance2 {
    /// Determinant of the 2x2 matrix.
    pub fn det(&self) -> f64 {
        self.c_pp * self.c_mm - self.c_pm * self.c_pm
    }

    /// True when the matrix is symmetric positive definite.
    pub fn is_positive_definite(&self) -> bool {
        self.c_pp > 0.0 && self.det() > 0.0
    }

    /// Largest relative element-wise deviation from `other`, normalising
    /// each element by the magnitude of `other`'s corresponding element.
    pub fn max_relative_deviation(&self, other: &Covariance2) -> f64 {
        let pairs = [
            (self.c_pp, other.c_pp),
            (self.c_mm, other.c_mm),
            (self.c_pm, other.c_pm),
        ];
        pairs
            .iter()
            .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Converts a one-way line loss in decibels to an amplitude transmission
/// factor `alpha = 10^(-loss_db / 20)`.
pub fn alpha_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 20.0)
}

/// Reflection coefficient of a resistive termination `r` on a line of
/// characteristic impedance `z0`.
pub fn reflection_coefficient(resistance: f64, z0: f64) -> Result<f64> {
    if !resistance.is_finite() || resistance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "resistance must be non-negative and finite, got {resistance}"
        )));
    }
    if !z0.is_finite() || z0 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "z0 must be positive and finite, got {z0}"
        )));
    }
    Ok((resistance - z0) / (resistance + z0))
}

/// Reflection coefficients for both ports of a line configuration.
pub fn reflection_coefficients(config: &LineConfig) -> Result<ReflectionPair> {
    config.validate()?;
    Ok(ReflectionPair {
        gamma_a: reflection_coefficient(config.r_alice, config.z0)?,
        gamma_b: reflection_coefficient(config.r_bob, config.z0)?,
    })
}

/// Converts the open-circuit source voltages at the two ports into the wave
/// amplitudes each port injects into the line.
///
/// A Thevenin source `v` behind resistance `r` launches `v' = (1 - gamma)/2
/// * v` into a line of impedance `z0`. With source variance
/// `4 * (r / z0) * s` this gives an injected variance of exactly
/// `(1 - gamma^2) * s`: lower-mismatch terminations inject more power.
pub fn injected_waves(
    source_a: &SampleStream,
    source_b: &SampleStream,
    gammas: ReflectionPair,
) -> Result<(SampleStream, SampleStream)> {
    gammas.validate()?;
    if source_a.len() != source_b.len() || source_a.sample_rate != source_b.sample_rate {
        return Err(Error::ShapeMismatch(format!(
            "source streams must share length and rate, got {}@{} and {}@{}",
            source_a.len(),
            source_a.sample_rate,
            source_b.len(),
            source_b.sample_rate
        )));
    }
    let inject = |stream: &SampleStream, gamma: f64| SampleStream {
        samples: stream
            .samples
            .iter()
            .map(|&v| 0.5 * (1.0 - gamma) * v)
            .collect(),
        sample_rate: stream.sample_rate,
    };
    Ok((
        inject(source_a, gammas.gamma_a),
        inject(source_b, gammas.gamma_b),
    ))
}

/// Sums the infinite bounce series to produce the steady-state directional
/// waves from the injected waves.
///
/// Every round trip multiplies a wave by `alpha^2 * gamma_a * gamma_b`, so
/// the series converges to
///
/// ```text
/// v_plus  = (inj_a + alpha * gamma_a * inj_b) / (1 - alpha^2 * gamma_a * gamma_b)
/// v_minus = (inj_b + alpha * gamma_b * inj_a) / (1 - alpha^2 * gamma_a * gamma_b)
/// ```
///
/// The band-limited sources change negligibly over one line delay, so the
/// bounce sum is evaluated sample-by-sample.
///
/// # Errors
///
/// Returns [`Error::SingularConfiguration`] when the denominator vanishes
/// (a lossless line between two total reflectors), and shape errors when the
/// injected streams disagree.
pub fn steady_state_waves(
    inj_a: &SampleStream,
    inj_b: &SampleStream,
    gammas: ReflectionPair,
    alpha: f64,
) -> Result<WavePair> {
    gammas.validate()?;
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if inj_a.len() != inj_b.len() || inj_a.sample_rate != inj_b.sample_rate {
        return Err(Error::ShapeMismatch(format!(
            "injected streams must share length and rate, got {}@{} and {}@{}",
            inj_a.len(),
            inj_a.sample_rate,
            inj_b.len(),
            inj_b.sample_rate
        )));
    }
    let denominator = 1.0 - alpha * alpha * gammas.gamma_a * gammas.gamma_b;
    if denominator.abs() < SINGULAR_EPS {
        return Err(Error::SingularConfiguration { denominator });
    }
    let n = inj_a.len();
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for (&a, &b) in inj_a.samples.iter().zip(&inj_b.samples) {
        plus.push((a + alpha * gammas.gamma_a * b) / denominator);
        minus.push((b + alpha * gammas.gamma_b * a) / denominator);
    }
    WavePair::new(
        SampleStream {
            samples: plus,
            sample_rate: inj_a.sample_rate,
        },
        SampleStream {
            samples: minus,
            sample_rate: inj_a.sample_rate,
        },
    )
}

/// Closed-form covariance of the steady-state directional waves.
///
/// With injected variances `noise_scale * (1 - gamma^2)` at each port and
/// the bounce sum of [`steady_state_waves`], the second moments work out to
///
/// ```text
/// c_pp = s * (1 - a2 * ga^2 * gb^2 + (a2 - 1) * ga^2) / d^2
/// c_mm = s * (1 - a2 * ga^2 * gb^2 + (a2 - 1) * gb^2) / d^2
/// c_pm = s * alpha * (ga * (1 - gb^2) + gb * (1 - ga^2)) / d^2
/// ```
///
/// with `a2 = alpha^2` and `d = 1 - a2 * ga * gb`. At `alpha = 1` the matrix
/// is invariant under swapping the two reflection coefficients, so a wave
/// observer learns nothing about which port holds which resistor; any loss
/// breaks that symmetry.
pub fn theoretical_covariance(
    gammas: ReflectionPair,
    alpha: f64,
    noise_scale: f64,
) -> Result<Covariance2> {
    gammas.validate()?;
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !noise_scale.is_finite() || noise_scale <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise_scale must be positive and finite, got {noise_scale}"
        )));
    }
    let a2 = alpha * alpha;
    let ga = gammas.gamma_a;
    let gb = gammas.gamma_b;
    let denominator = 1.0 - a2 * ga * gb;
    if denominator.abs() < SINGULAR_EPS {
        return Err(Error::SingularConfiguration { denominator });
    }
    let pref = noise_scale / (denominator * denominator);
    let cross = a2 * ga * ga * gb * gb;
    Ok(Covariance2 {
        c_pp: pref * (1.0 - cross + (a2 - 1.0) * ga * ga),
        c_mm: pref * (1.0 - cross + (a2 - 1.0) * gb * gb),
        c_pm: pref * alpha * (ga * (1.0 - gb * gb) + gb * (1.0 - ga * ga)),
    })
}

/// Simulates one complete exchange: draws band-limited thermal noise for both
/// resistors, injects it, and couples it into steady-state directional waves.
///
/// Seeds for the two sources are derived from `seed` so that a single root
/// seed reproduces the whole exchange bit-for-bit.
pub fn simulate_exchange(config: &LineConfig, band: &BandSpec, seed: u64) -> Result<WavePair> {
    config.validate()?;
    band.validate()?;
    let gammas = reflection_coefficients(config)?;
    let var_a = 4.0 * (config.r_alice / config.z0) * config.noise_scale;
    let var_b = 4.0 * (config.r_bob / config.z0) * config.noise_scale;
    let source_a = generate_band_limited_noise(band, var_a, derive_seed(seed, 1))?;
    let source_b = generate_band_limited_noise(band, var_b, derive_seed(seed, 2))?;
    let (inj_a, inj_b) = injected_waves(&source_a, &source_b, gammas)?;
    steady_state_waves(&inj_a, &inj_b, gammas, config.alpha)
}
