//! Directional wave probe: separates the two travelling waves on the line
//! from two physically measurable tap signals.
//!
//! The probe observes the line voltage `v = v_plus + v_minus` and an
//! auxiliary signal from a short sensing section: the same superposition
//! with the right-travelling component picked up a delay `tap_delay` early
//! and the left-travelling component a delay late, minus the direct voltage:
//!
//! ```text
//! v_x(t) = v_plus(t - tap_delay) + v_minus(t + tap_delay) - v(t)
//! ```
//!
//! For an electrically short tap (`tap_delay` much smaller than the shortest
//! signal period) `v_x` approximates `tap_delay` times the difference of the
//! two waves' derivatives, so a short FIR filter `w` applied to `v_x` can
//! reproduce the derivative of either single direction. Calibration adapts
//! `w` on a known right-only excitation until the left output is nulled;
//! decomposition then forms
//!
//! ```text
//! y_plus  = D[v] - (w * v_x)      y_minus = D[v] + (w * v_x)
//! ```
//!
//! where `D` is the backward first difference scaled by the sample rate.
//! Both outputs live in the derivative domain; [`undo_first_difference`]
//! restores wave-domain samples for covariance work.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::line::WavePair;
use crate::noise::SampleStream;

/// Samples per adaptation block: the residual-coupling stopping statistic is
/// evaluated once per block.
pub const CALIBRATION_BLOCK: usize = 2048;

/// Total adaptation samples allowed before calibration gives up.
pub const CALIBRATION_BUDGET: usize = 1_000_000;

/// Settings of the directional probe.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbeConfig {
    /// Sensing-section delay in seconds. Must stay well below half a period
    /// of the highest signal frequency for the derivative picture to hold;
    /// see [`ProbeConfig::validate_for_band`].
    pub tap_delay: f64,
    /// Sample rate of the signals presented to the probe, in hertz.
    pub sample_rate: f64,
    /// High-pass cutoff applied before adaptation, in hertz.
    pub hp_cutoff: f64,
    /// Normalised LMS step size.
    pub lms_step: f64,
    /// Residual directional coupling below which calibration stops.
    pub calib_threshold: f64,
    /// Number of FIR taps adapted during calibration.
    pub tap_count: usize,
}

impl ProbeConfig {
    /// Probe with the given geometry and default adaptation settings:
    /// 100 Hz high-pass, step 1e-3, stopping threshold 0.01, one tap.
    pub fn new(tap_delay: f64, sample_rate: f64) -> Self {
        ProbeConfig {
            tap_delay,
            sample_rate,
            hp_cutoff: 100.0,
            lms_step: 1e-3,
            calib_threshold: 0.01,
            tap_count: 1,
        }
    }

    /// Checks the internal consistency of the settings.
    pub fn validate(&self) -> Result<()> {
        if !self.tap_delay.is_finite() || self.tap_delay <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tap_delay must be positive and finite, got {}",
                self.tap_delay
            )));
        }
        if !self.sample_rate.is_finite() || self.sample_rate <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sample_rate must be positive and finite, got {}",
                self.sample_rate
            )));
        }
        if !self.hp_cutoff.is_finite()
            || self.hp_cutoff <= 0.0
            || self.hp_cutoff >= self.sample_rate / 2.0
        {
            return Err(Error::InvalidParameter(format!(
                "hp_cutoff must lie in (0, sample_rate/2), got {}",
                self.hp_cutoff
            )));
        }
        if !self.lms_step.is_finite() || self.lms_step <= 0.0 || self.lms_step > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "lms_step must lie in (0, 1], got {}",
                self.lms_step
            )));
        }
        if !self.calib_threshold.is_finite() || self.calib_threshold <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "calib_threshold must be positive, got {}",
                self.calib_threshold
            )));
        }
        if self.tap_count == 0 || self.tap_count > 64 {
            return Err(Error::InvalidParameter(format!(
                "tap_count must lie in 1..=64, got {}",
                self.tap_count
            )));
        }
        Ok(())
    }

    /// Additionally checks that the tap is electrically short for content up
    /// to `f_high`: `tap_delay < 1 / (2 * f_high)`.
    pub fn validate_for_band(&self, f_high: f64) -> Result<()> {
        self.validate()?;
        if !f_high.is_finite() || f_high <= 0.0 || self.tap_delay >= 1.0 / (2.0 * f_high) {
            return Err(Error::InvalidParameter(format!(
                "tap_delay {} is not electrically short for content up to {} Hz",
                self.tap_delay, f_high
            )));
        }
        Ok(())
    }
}

/// The two signals a physical tap makes available to the eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSignals {
    /// Direct line voltage `v_plus + v_minus`.
    pub v: SampleStream,
    /// Differential sensing signal; see the module docs.
    pub v_x: SampleStream,
}

impl TapSignals {
    /// Wraps the two signals after checking they share length and rate.
    pub fn new(v: SampleStream, v_x: SampleStream) -> Result<Self> {
        if v.len() != v_x.len() || v.sample_rate != v_x.sample_rate {
            return Err(Error::ShapeMismatch(format!(
                "tap signals must share length and rate, got {}@{} and {}@{}",
                v.len(),
                v.sample_rate,
                v_x.len(),
                v_x.sample_rate
            )));
        }
        Ok(TapSignals { v, v_x })
    }

    /// Number of samples in each signal.
    pub fn len(&self) -> usize {
        self.v.len()
    }

    /// True when the signals are empty.
    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Result of probe calibration: the adapted FIR weights and the residual
/// directional coupling at the point adaptation stopped.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbeState {
    weights: Vec<f64>,
    converged: bool,
    measured_gamma: f64,
}

impl ProbeState {
    /// Assembles a state explicitly. Normal use obtains states from
    /// [`lms_calibrate`]; this constructor exists for persistence and tests.
    pub fn new(weights: Vec<f64>, converged: bool, measured_gamma: f64) -> Self {
        ProbeState {
            weights,
            converged,
            measured_gamma,
        }
    }

    /// Adapted FIR weights, most recent tap first.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when calibration reached its stopping threshold.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Residual directional coupling measured on the last adaptation block.
    pub fn measured_gamma(&self) -> f64 {
        self.measured_gamma
    }
}

/// Applies a circular fractional delay (positive `delay` shifts the signal
/// later in time) through the frequency domain.
fn fractional_delay(stream: &SampleStream, delay: f64) -> SampleStream {
    let n = stream.len();
    let mut buf: Vec<Complex<f64>> = stream
        .samples
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, value) in buf.iter_mut().enumerate() {
        // Signed alias frequency of bin k for a real signal.
        let freq = if 2 * k <= n {
            k as f64 * stream.sample_rate / n as f64
        } else {
            (k as f64 - n as f64) * stream.sample_rate / n as f64
        };
        let phase = -2.0 * std::f64::consts::PI * freq * delay;
        if n.is_multiple_of(2) && 2 * k == n {
            // Keep the Nyquist bin real so the output stays real.
            *value *= phase.cos();
        } else {
            *value *= Complex::from_polar(1.0, phase);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    SampleStream {
        samples: buf.iter().map(|c| c.re * scale).collect(),
        sample_rate: stream.sample_rate,
    }
}

/// Builds the two tap signals from known directional waves.
///
/// This is the simulation of the physical tap: real hardware measures `v`
/// and `v_x` directly, while here they are synthesised from the ground-truth
/// waves so that every later stage can be validated against that truth.
pub fn synthesize_tap_signals(waves: &WavePair, config: &ProbeConfig) -> Result<TapSignals> {
    config.validate()?;
    if waves.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot synthesise tap signals from empty waves".to_string(),
        ));
    }
    if waves.v_plus.sample_rate != config.sample_rate {
        return Err(Error::ShapeMismatch(format!(
            "waves are sampled at {} Hz but the probe expects {} Hz",
            waves.v_plus.sample_rate, config.sample_rate
        )));
    }
    let n = waves.len();
    let plus_late = fractional_delay(&waves.v_plus, config.tap_delay);
    let minus_early = fractional_delay(&waves.v_minus, -config.tap_delay);
    let mut v = Vec::with_capacity(n);
    let mut v_x = Vec::with_capacity(n);
    for i in 0..n {
        let direct = waves.v_plus.samples[i] + waves.v_minus.samples[i];
        v.push(direct);
        v_x.push(plus_late.samples[i] + minus_early.samples[i] - direct);
    }
    TapSignals::new(
        SampleStream {
            samples: v,
            sample_rate: config.sample_rate,
        },
        SampleStream {
            samples: v_x,
            sample_rate: config.sample_rate,
        },
    )
}

/// Coefficients of one direct-form biquad section.
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Second-order Butterworth high-pass section with quality factor `q`,
    /// designed by the bilinear transform.
    fn butterworth_high_pass(cutoff: f64, sample_rate: f64, q: f64) -> Biquad {
        let omega = 2.0 * std::f64::consts::PI * cutoff / sample_rate;
        let alpha = omega.sin() / (2.0 * q);
        let cosw = omega.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cosw) / (2.0 * a0),
            b1: -(1.0 + cosw) / a0,
            b2: (1.0 + cosw) / (2.0 * a0),
            a1: -2.0 * cosw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Pole radius of the section, governing transient decay.
    fn pole_radius(&self) -> f64 {
        self.a2.abs().sqrt()
    }

    fn run(&self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for &x in input {
            let y = self.b0 * x + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            out.push(y);
        }
        out
    }
}

/// Quality factors of the two sections of a fourth-order Butterworth filter.
const BUTTERWORTH4_Q: [f64; 2] = [0.5411961001461971, 1.3065629648763766];

/// Fourth-order Butterworth high-pass filter, applied causally from zero
/// initial state.
///
/// Stops drift and mains-frequency pickup before adaptation: rejection at
/// half the cutoff exceeds 20 dB while the passband is flat within 0.5 dB
/// from twice the cutoff up.
pub fn high_pass(stream: &SampleStream, cutoff: f64) -> Result<SampleStream> {
    if !cutoff.is_finite() || cutoff <= 0.0 || cutoff >= stream.sample_rate / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "high-pass cutoff must lie in (0, sample_rate/2), got {cutoff}"
        )));
    }
    let mut samples = stream.samples.clone();
    for q in BUTTERWORTH4_Q {
        let section = Biquad::butterworth_high_pass(cutoff, stream.sample_rate, q);
        samples = section.run(&samples);
    }
    Ok(SampleStream {
        samples,
        sample_rate: stream.sample_rate,
    })
}

/// Number of samples after which the high-pass start-up transient has
/// decayed below one part in 1e10.
pub fn high_pass_warmup(cutoff: f64, sample_rate: f64) -> usize {
    let target: f64 = 1e-10;
    BUTTERWORTH4_Q
        .iter()
        .map(|&q| {
            let radius = Biquad::butterworth_high_pass(cutoff, sample_rate, q).pole_radius();
            if radius <= 0.0 || radius >= 1.0 {
                0
            } else {
                (target.ln() / radius.ln()).ceil() as usize
            }
        })
        .max()
        .unwrap_or(0)
}

/// Backward first difference scaled by the sample rate; the first output
/// sample assumes zero history.
fn first_difference(samples: &[f64], sample_rate: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = 0.0;
    for &x in samples {
        out.push((x - prev) * sample_rate);
        prev = x;
    }
    out
}

/// FIR convolution with zero history: `sum_j weights[j] * x[i - j]`.
fn fir(weights: &[f64], x: &[f64], i: usize) -> f64 {
    let mut acc = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        if i >= j {
            acc += w * x[i - j];
        }
    }
    acc
}

/// Adapts the probe's FIR weights on a known right-only excitation.
///
/// Both tap signals are high-pass filtered, the direct voltage is
/// differentiated, and a normalised LMS loop drives the left output
/// `D[v] + w * v_x` toward zero in blocks of [`CALIBRATION_BLOCK`] samples.
/// After each block the residual directional coupling
/// `sum(y_minus * y_plus) / sum(y_plus^2)` is evaluated; adaptation stops as
/// soon as its magnitude falls below `config.calib_threshold`. The input is
/// recycled as often as needed up to [`CALIBRATION_BUDGET`] total samples.
///
/// # Errors
///
/// [`Error::CalibrationFailure`] carries the final residual coupling when
/// the budget is exhausted (a silent input never updates the weights and
/// reports a NaN residual). [`Error::InvalidParameter`] flags inputs shorter
/// than the filter warm-up plus one block.
pub fn lms_calibrate(signals: &TapSignals, config: &ProbeConfig) -> Result<ProbeState> {
    config.validate()?;
    if signals.v.sample_rate != config.sample_rate {
        return Err(Error::ShapeMismatch(format!(
            "tap signals are sampled at {} Hz but the probe expects {} Hz",
            signals.v.sample_rate, config.sample_rate
        )));
    }
    let hp_v = high_pass(&signals.v, config.hp_cutoff)?;
    let hp_x = high_pass(&signals.v_x, config.hp_cutoff)?;
    let d = first_difference(&hp_v.samples, config.sample_rate);
    let x = &hp_x.samples;

    let skip = high_pass_warmup(config.hp_cutoff, config.sample_rate).max(config.tap_count);
    let n = signals.len();
    if n < skip + CALIBRATION_BLOCK {
        return Err(Error::InvalidParameter(format!(
            "calibration needs at least {} samples after the {skip}-sample warm-up, got {n}",
            CALIBRATION_BLOCK
        )));
    }

    let mut weights = vec![0.0; config.tap_count];
    let mut cursor = skip;
    let mut consumed = 0;
    let mut residual = f64::NAN;
    while consumed < CALIBRATION_BUDGET {
        if cursor + CALIBRATION_BLOCK > n {
            cursor = skip;
        }
        let block = cursor..cursor + CALIBRATION_BLOCK;
        let power = x[block.clone()].iter().map(|&v| v * v).sum::<f64>()
            / CALIBRATION_BLOCK as f64;
        residual = f64::NAN;
        if power > 0.0 {
            let gain = config.lms_step / power;
            let mut cross = 0.0;
            let mut right_power = 0.0;
            for i in block.clone() {
                // Left output with the current weights is the adaptation error.
                let y_minus = d[i] + fir(&weights, x, i);
                for (j, w) in weights.iter_mut().enumerate() {
                    *w -= gain * y_minus * x[i - j];
                }
                // Right output with the just-updated weights.
                let y_plus = d[i] - fir(&weights, x, i);
                cross += y_minus * y_plus;
                right_power += y_plus * y_plus;
            }
            if right_power > 0.0 {
                residual = cross / right_power;
            }
        }
        consumed += CALIBRATION_BLOCK;
        cursor += CALIBRATION_BLOCK;
        if residual.is_finite() && residual.abs() < config.calib_threshold {
            return Ok(ProbeState {
                weights,
                converged: true,
                measured_gamma: residual,
            });
        }
    }
    Err(Error::CalibrationFailure {
        residual_gamma: residual,
    })
}

/// Splits the tap signals into derivative-domain directional outputs using a
/// converged calibration.
///
/// The first `tap_count` output samples are computed with zero history and
/// carry a start-up artefact; consumers should discard a short prefix.
///
/// # Errors
///
/// [`Error::NotCalibrated`] when the state has not converged.
pub fn decompose(
    signals: &TapSignals,
    state: &ProbeState,
    config: &ProbeConfig,
) -> Result<WavePair> {
    config.validate()?;
    if !state.converged() {
        return Err(Error::NotCalibrated);
    }
    if signals.v.sample_rate != config.sample_rate {
        return Err(Error::ShapeMismatch(format!(
            "tap signals are sampled at {} Hz but the probe expects {} Hz",
            signals.v.sample_rate, config.sample_rate
        )));
    }
    let d = first_difference(&signals.v.samples, config.sample_rate);
    let x = &signals.v_x.samples;
    let n = signals.len();
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for (i, &di) in d.iter().enumerate().take(n) {
        let g = fir(state.weights(), x, i);
        plus.push(di - g);
        minus.push(di + g);
    }
    WavePair::new(
        SampleStream {
            samples: plus,
            sample_rate: config.sample_rate,
        },
        SampleStream {
            samples: minus,
            sample_rate: config.sample_rate,
        },
    )
}

/// Inverts the probe's first-difference operator inside a frequency band,
/// zeroing all content outside it, to bring decomposed outputs back to the
/// wave domain.
///
/// Decimated wave-domain samples reproduce the closed-form covariance of the
/// underlying directional waves up to the probe's overall gain; leaving the
/// outputs in the derivative domain would re-correlate samples spaced one
/// correlation time apart.
pub fn undo_first_difference(waves: &WavePair, f_low: f64, f_high: f64) -> Result<WavePair> {
    let fs = waves.v_plus.sample_rate;
    if !f_low.is_finite() || f_low < 0.0 || !f_high.is_finite() || f_high <= f_low {
        return Err(Error::InvalidParameter(format!(
            "band edges must satisfy 0 <= f_low < f_high, got [{f_low}, {f_high}]"
        )));
    }
    if f_high > fs / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "f_high {f_high} exceeds the Nyquist frequency {}",
            fs / 2.0
        )));
    }
    if waves.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot restore an empty wave pair".to_string(),
        ));
    }
    let n = waves.len();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let restore = |stream: &SampleStream| -> SampleStream {
        let mut buf: Vec<Complex<f64>> = stream
            .samples
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .collect();
        forward.process(&mut buf);
        for (k, value) in buf.iter_mut().enumerate() {
            let alias = k.min(n - k);
            let freq = alias as f64 * fs / n as f64;
            if k != 0 && freq >= f_low && freq <= f_high {
                let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let transfer = Complex::new(fs, 0.0)
                    * (Complex::new(1.0, 0.0) - Complex::from_polar(1.0, -omega));
                *value /= transfer;
            } else {
                *value = Complex::new(0.0, 0.0);
            }
        }
        inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        SampleStream {
            samples: buf.iter().map(|c| c.re * scale).collect(),
            sample_rate: fs,
        }
    };
    WavePair::new(restore(&waves.v_plus), restore(&waves.v_minus))
}

/// Reflectometer: ratio of reflected to incident wave power projected onto
/// the incident wave, `sum(v_minus * v_plus) / sum(v_plus^2)`.
///
/// For `v_minus = gamma * v_plus` this returns exactly `gamma`, and it is
/// invariant under a common rescaling of both inputs.
///
/// # Errors
///
/// [`Error::DegenerateMeasurement`] when the incident wave carries no power.
pub fn measure_reflection(waves: &WavePair) -> Result<f64> {
    let mut cross = 0.0;
    let mut incident = 0.0;
    for (&p, &m) in waves.v_plus.samples.iter().zip(&waves.v_minus.samples) {
        cross += m * p;
        incident += p * p;
    }
    if incident <= 0.0 || !incident.is_finite() {
        return Err(Error::DegenerateMeasurement);
    }
    Ok(cross / incident)
}

/// One point of the probe's measured frequency response.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResponsePoint {
    /// Stimulus frequency in hertz (snapped to the nearest analysis bin).
    pub frequency: f64,
    /// Magnitude of the compensated sensing-path response.
    pub magnitude: f64,
    /// Phase of the compensated response in degrees.
    pub phase_deg: f64,
}

/// Block length used by [`probe_frequency_response`].
const RESPONSE_BLOCK: usize = 1 << 16;

/// Measures the sensing-path transfer function with single-direction
/// sinusoidal drives.
///
/// Each requested frequency is snapped to the nearest analysis bin, a
/// right-travelling cosine is pushed through tap synthesis, an optional
/// leakage `dc_leak * v` is added to `v_x` to model imperfect subtraction,
/// and the complex ratio `-v_x / v` is read off the drive bin. The response
/// at zero frequency, measured with a constant drive, is subtracted so that
/// leakage does not bias the reported curve. For an ideal electrically short
/// tap the result is `1 - exp(-i * 2 * pi * f * tap_delay)`: magnitude
/// growing linearly from zero with frequency and phase near +90 degrees.
pub fn probe_frequency_response(
    config: &ProbeConfig,
    frequencies: &[f64],
    dc_leak: f64,
) -> Result<Vec<ResponsePoint>> {
    config.validate()?;
    if !dc_leak.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dc_leak must be finite, got {dc_leak}"
        )));
    }
    let n = RESPONSE_BLOCK;
    let fs = config.sample_rate;

    // Zero-frequency response from a constant unit drive.
    let constant = single_direction_tap(config, vec![1.0; n])?;
    let leak_of = |taps: &TapSignals, i: usize| taps.v_x.samples[i] + dc_leak * taps.v.samples[i];
    let mean_v: f64 = constant.v.samples.iter().sum::<f64>() / n as f64;
    let mean_x: f64 = (0..n).map(|i| leak_of(&constant, i)).sum::<f64>() / n as f64;
    let h_zero = -mean_x / mean_v;

    let mut points = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        if !f.is_finite() || f <= 0.0 || f >= fs / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "stimulus frequency must lie in (0, sample_rate/2), got {f}"
            )));
        }
        let bin = ((f * n as f64 / fs).round() as usize).clamp(1, n / 2 - 1);
        let snapped = bin as f64 * fs / n as f64;
        let drive: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * bin as f64 * i as f64 / n as f64).cos())
            .collect();
        let taps = single_direction_tap(config, drive)?;

        let project = |value: &dyn Fn(usize) -> f64| -> Complex<f64> {
            let mut acc = Complex::new(0.0, 0.0);
            for i in 0..n {
                let phase = -2.0 * std::f64::consts::PI * bin as f64 * i as f64 / n as f64;
                acc += value(i) * Complex::from_polar(1.0, phase);
            }
            acc
        };
        let v_amp = project(&|i| taps.v.samples[i]);
        let x_amp = project(&|i| leak_of(&taps, i));
        let response = -(x_amp / v_amp) - h_zero;
        points.push(ResponsePoint {
            frequency: snapped,
            magnitude: response.norm(),
            phase_deg: response.arg().to_degrees(),
        });
    }
    Ok(points)
}

/// Tap signals for a pure right-travelling drive.
fn single_direction_tap(config: &ProbeConfig, drive: Vec<f64>) -> Result<TapSignals> {
    let n = drive.len();
    let waves = WavePair::new(
        SampleStream {
            samples: drive,
            sample_rate: config.sample_rate,
        },
        SampleStream {
            samples: vec![0.0; n],
            sample_rate: config.sample_rate,
        },
    )?;
    synthesize_tap_signals(&waves, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{generate_band_limited_noise, BandSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const FS: f64 = 50_000.0;

    fn right_only_waves(n: usize, seed: u64) -> WavePair {
        let band = BandSpec::new(FS, 500.0, 5_500.0, n).unwrap();
        let plus = generate_band_limited_noise(&band, 1.0, seed).unwrap();
        let minus = SampleStream {
            samples: vec![0.0; n],
            sample_rate: FS,
        };
        WavePair::new(plus, minus).unwrap()
    }

    fn left_only_waves(n: usize, seed: u64) -> WavePair {
        let band = BandSpec::new(FS, 500.0, 5_500.0, n).unwrap();
        let minus = generate_band_limited_noise(&band, 1.0, seed).unwrap();
        let plus = SampleStream {
            samples: vec![0.0; n],
            sample_rate: FS,
        };
        WavePair::new(plus, minus).unwrap()
    }

    fn cosine(n: usize, bin: usize) -> SampleStream {
        SampleStream {
            samples: (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * bin as f64 * i as f64 / n as f64).cos())
                .collect(),
            sample_rate: FS,
        }
    }

    fn rms(samples: &[f64]) -> f64 {
        (samples.iter().map(|&x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        assert!(ProbeConfig::new(0.0, FS).validate().is_err());
        assert!(ProbeConfig::new(-1e-6, FS).validate().is_err());
        assert!(ProbeConfig::new(1e-6, 0.0).validate().is_err());
        let mut config = ProbeConfig::new(1e-6, FS);
        assert!(config.validate().is_ok());
        config.tap_count = 0;
        assert!(config.validate().is_err());
        config.tap_count = 1;
        config.lms_step = 0.0;
        assert!(config.validate().is_err());
        config.lms_step = 1e-3;
        config.hp_cutoff = FS;
        assert!(config.validate().is_err());
    }

    #[test]
    fn electrical_shortness_is_checked_against_the_band() {
        // 90 us is short for 5.5 kHz content (half-period 91 us) but a
        // 100 us tap is not.
        assert!(ProbeConfig::new(90e-6, FS).validate_for_band(5_500.0).is_ok());
        assert!(ProbeConfig::new(100e-6, FS)
            .validate_for_band(5_500.0)
            .is_err());
    }

    #[test]
    fn right_only_sinusoid_has_the_ideal_tap_magnitude() {
        let n = 4096;
        let bin = 82; // 1000.98 Hz, exactly on an analysis bin
        let tap_delay = 4e-5; // two samples
        let config = ProbeConfig::new(tap_delay, FS);
        let waves = WavePair::new(
            cosine(n, bin),
            SampleStream {
                samples: vec![0.0; n],
                sample_rate: FS,
            },
        )
        .unwrap();
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        let f = bin as f64 * FS / n as f64;
        // |v_x / v| = |exp(-i w tau) - 1| = 2 sin(pi f tau) for a pure
        // right-travelling tone.
        let expected = 2.0 * (std::f64::consts::PI * f * tap_delay).sin();
        assert_relative_eq!(
            rms(&taps.v_x.samples) / rms(&taps.v.samples),
            expected,
            max_relative = 1e-9
        );
    }

    #[test]
    fn symmetric_drive_leaves_only_second_order_residue() {
        // Equal waves in both directions turn the tap difference into a
        // symmetric second difference: v_x = 2 cos(w t) (cos(w tau) - 1)
        // against v = 2 cos(w t), an rms ratio of 1 - cos(w tau).
        let n = 4096;
        let bin = 82;
        let tap_delay = 4e-5;
        let config = ProbeConfig::new(tap_delay, FS);
        let tone = cosine(n, bin);
        let waves = WavePair::new(tone.clone(), tone).unwrap();
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        let f = bin as f64 * FS / n as f64;
        let expected = 1.0 - (2.0 * std::f64::consts::PI * f * tap_delay).cos();
        assert_relative_eq!(
            rms(&taps.v_x.samples) / rms(&taps.v.samples),
            expected,
            max_relative = 1e-9
        );
    }

    #[test]
    fn constant_drive_produces_no_tap_output() {
        let n = 1024;
        let config = ProbeConfig::new(1e-6, FS);
        let ones = SampleStream {
            samples: vec![1.0; n],
            sample_rate: FS,
        };
        let waves = WavePair::new(ones.clone(), ones).unwrap();
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        for &x in &taps.v_x.samples {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn high_pass_blocks_dc_and_mains_but_passes_the_band() {
        let n = 1 << 15;
        let cutoff = 100.0;
        let warmup = high_pass_warmup(cutoff, FS);
        assert!(warmup > 0 && warmup < n / 2);

        // DC is annihilated.
        let constant = SampleStream {
            samples: vec![1.0; n],
            sample_rate: FS,
        };
        let settled = high_pass(&constant, cutoff).unwrap();
        let tail = rms(&settled.samples[warmup..]);
        assert!(tail < 1e-8, "dc residue {tail:e}");

        // 48.8 Hz (mains region, half the cutoff) drops by more than 20 dB.
        let mains = high_pass(&cosine(n, 32), cutoff).unwrap();
        let gain = rms(&mains.samples[warmup..]) / std::f64::consts::FRAC_1_SQRT_2;
        assert!(gain < 0.1, "mains gain {gain}");

        // 199.9 Hz (twice the cutoff) passes within 0.5 dB.
        let edge = high_pass(&cosine(n, 131), cutoff).unwrap();
        let gain = rms(&edge.samples[warmup..]) / std::f64::consts::FRAC_1_SQRT_2;
        assert!((0.9441..1.0593).contains(&gain), "edge gain {gain}");

        // 1 kHz passes essentially untouched.
        let band = high_pass(&cosine(n, 655), cutoff).unwrap();
        let gain = rms(&band.samples[warmup..]) / std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(gain, 1.0, max_relative = 1e-3);

        assert!(high_pass(&constant, 0.0).is_err());
        assert!(high_pass(&constant, FS).is_err());
    }

    #[test]
    fn warmup_shrinks_with_rising_cutoff() {
        assert!(high_pass_warmup(100.0, FS) > high_pass_warmup(1_000.0, FS));
    }

    #[test]
    fn calibration_matches_least_squares_on_exact_geometry() {
        // With the tap delay equal to one sample, v_x is exactly the negated
        // scaled first difference of v, so a single tap can null the left
        // output completely and the optimum weight is the sample rate.
        let n = 1 << 17;
        let config = ProbeConfig::new(1.0 / FS, FS);
        let waves = right_only_waves(n, 101);
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        let state = lms_calibrate(&taps, &config).unwrap();
        assert!(state.converged());
        assert!(state.measured_gamma().abs() < 0.01);

        // Independent closed-form least squares on the same filtered data.
        let hp_v = high_pass(&taps.v, config.hp_cutoff).unwrap();
        let hp_x = high_pass(&taps.v_x, config.hp_cutoff).unwrap();
        let d = first_difference(&hp_v.samples, FS);
        let skip = high_pass_warmup(config.hp_cutoff, FS);
        let mut num = 0.0;
        let mut den = 0.0;
        for (&di, &xi) in d[skip..n].iter().zip(&hp_x.samples[skip..n]) {
            num += di * xi;
            den += xi * xi;
        }
        let ls_weight = -num / den;
        assert_relative_eq!(state.weights()[0], ls_weight, max_relative = 0.05);
        assert_relative_eq!(ls_weight, FS, max_relative = 1e-6);

        // The residual left-channel power is far below the right channel.
        let outputs = decompose(&taps, &state, &config).unwrap();
        let start = skip.max(64);
        let leak = rms(&outputs.v_minus.samples[start..]) / rms(&outputs.v_plus.samples[start..]);
        assert!(leak * leak < 1e-4, "residual power ratio {:e}", leak * leak);
    }

    #[test]
    fn calibration_fails_cleanly_on_silence() {
        let n = 1 << 14;
        let config = ProbeConfig::new(1.0 / FS, FS);
        let zeros = SampleStream {
            samples: vec![0.0; n],
            sample_rate: FS,
        };
        let taps = TapSignals::new(zeros.clone(), zeros).unwrap();
        match lms_calibrate(&taps, &config) {
            Err(Error::CalibrationFailure { residual_gamma }) => {
                assert!(residual_gamma.is_nan());
            }
            other => panic!("expected calibration failure, got {other:?}"),
        }
    }

    #[test]
    fn calibration_rejects_streams_shorter_than_warmup() {
        let config = ProbeConfig::new(1.0 / FS, FS);
        let waves = right_only_waves(4_096, 7);
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        assert!(matches!(
            lms_calibrate(&taps, &config),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn wrong_direction_calibration_swaps_the_axes() {
        // Calibrating on a left-only excitation still converges, but the
        // dominant weight comes out negative: the probe's outputs are
        // swapped, not broken, and the sign of the weights reveals it.
        let n = 1 << 17;
        let mut config = ProbeConfig::new(1.0 / FS, FS);
        config.tap_count = 2;
        let waves = left_only_waves(n, 313);
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        let state = lms_calibrate(&taps, &config).unwrap();
        assert!(state.converged());
        let dominant = state
            .weights()
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap();
        assert!(
            dominant < -0.5 * FS,
            "expected a strongly negative dominant weight, got {:?}",
            state.weights()
        );
    }

    #[test]
    fn decompose_requires_a_converged_state() {
        let config = ProbeConfig::new(1.0 / FS, FS);
        let waves = right_only_waves(8_192, 5);
        let taps = synthesize_tap_signals(&waves, &config).unwrap();
        let stale = ProbeState::new(vec![0.0], false, f64::NAN);
        assert!(matches!(
            decompose(&taps, &stale, &config),
            Err(Error::NotCalibrated)
        ));
    }

    #[test]
    fn short_tap_isolates_both_directions_by_forty_db() {
        // Harness geometry: a 50 ns sensing section and two adapted taps.
        let mut config = ProbeConfig::new(50e-9, FS);
        config.tap_count = 2;
        let n = 1 << 17;
        let taps = synthesize_tap_signals(&right_only_waves(n, 211), &config).unwrap();
        let state = lms_calibrate(&taps, &config).unwrap();
        assert!(state.converged());

        let start = high_pass_warmup(config.hp_cutoff, FS);
        // Fresh right-only excitation: the left output must stay 40 dB down.
        let fresh = synthesize_tap_signals(&right_only_waves(n, 401), &config).unwrap();
        let out = decompose(&fresh, &state, &config).unwrap();
        let leak_r = out.v_minus.samples[start..]
            .iter()
            .map(|&x| x * x)
            .sum::<f64>()
            / out.v_plus.samples[start..]
                .iter()
                .map(|&x| x * x)
                .sum::<f64>();
        assert!(leak_r < 1e-4, "right-drive leakage {leak_r:e}");

        // Left-only excitation: the right output must stay 40 dB down.
        let fresh = synthesize_tap_signals(&left_only_waves(n, 501), &config).unwrap();
        let out = decompose(&fresh, &state, &config).unwrap();
        let leak_l = out.v_plus.samples[start..]
            .iter()
            .map(|&x| x * x)
            .sum::<f64>()
            / out.v_minus.samples[start..]
                .iter()
                .map(|&x| x * x)
                .sum::<f64>();
        assert!(leak_l < 1e-4, "left-drive leakage {leak_l:e}");
    }

    #[test]
    fn decomposed_band_noise_stays_coherent_with_the_truth() {
        // The derivative-domain right output must track the derivative of
        // the true right wave nearly perfectly inside the band.
        let mut config = ProbeConfig::new(50e-9, FS);
        config.tap_count = 2;
        let n = 1 << 17;
        let taps = synthesize_tap_signals(&right_only_waves(n, 211), &config).unwrap();
        let state = lms_calibrate(&taps, &config).unwrap();

        let truth = right_only_waves(n, 601);
        let out = decompose(
            &synthesize_tap_signals(&truth, &config).unwrap(),
            &state,
            &config,
        )
        .unwrap();
        let d_truth = first_difference(&truth.v_plus.samples, FS);
        let start = 64;
        let mut dot = 0.0;
        let mut pw_a = 0.0;
        let mut pw_b = 0.0;
        for (&oi, &ti) in out.v_plus.samples[start..n].iter().zip(&d_truth[start..n]) {
            // The probe output carries a factor 2 (both halves of the tap).
            let b = 2.0 * ti;
            dot += oi * b;
            pw_a += oi * oi;
            pw_b += b * b;
        }
        let coherence = dot / (pw_a * pw_b).sqrt();
        assert!(coherence > 0.99, "coherence {coherence}");
    }

    #[test]
    fn wave_domain_restoration_inverts_the_difference() {
        let n = 1 << 14;
        let band = BandSpec::new(FS, 500.0, 5_500.0, n).unwrap();
        let x = generate_band_limited_noise(&band, 1.0, 909).unwrap();
        // Circular first difference, matching the circular deconvolution.
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            let prev = if i == 0 { x.samples[n - 1] } else { x.samples[i - 1] };
            d.push((x.samples[i] - prev) * FS);
        }
        let diff = SampleStream {
            samples: d,
            sample_rate: FS,
        };
        let waves = WavePair::new(diff.clone(), diff).unwrap();
        let restored = undo_first_difference(&waves, 500.0, 5_500.0).unwrap();
        let err: f64 = restored
            .v_plus
            .samples
            .iter()
            .zip(&x.samples)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64;
        assert!(
            err.sqrt() / rms(&x.samples) < 1e-9,
            "restoration error {:e}",
            err.sqrt()
        );
        assert!(undo_first_difference(&waves, 500.0, 100.0).is_err());
        assert!(undo_first_difference(&waves, 500.0, FS).is_err());
    }

    #[test]
    fn reflectometer_reads_constructed_fixtures_exactly() {
        let n = 1 << 14;
        let band = BandSpec::new(FS, 500.0, 5_500.0, n).unwrap();
        let incident = generate_band_limited_noise(&band, 1.0, 77).unwrap();
        for &gamma in &[1.0, -1.0, 0.0, 0.5, -0.25] {
            let reflected = SampleStream {
                samples: incident.samples.iter().map(|&x| gamma * x).collect(),
                sample_rate: FS,
            };
            let waves = WavePair::new(incident.clone(), reflected).unwrap();
            assert_relative_eq!(
                measure_reflection(&waves).unwrap(),
                gamma,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn reflectometer_is_scale_invariant_and_rejects_silence() {
        let n = 4_096;
        let band = BandSpec::new(FS, 500.0, 5_500.0, n).unwrap();
        let incident = generate_band_limited_noise(&band, 1.0, 78).unwrap();
        let reflected = SampleStream {
            samples: incident.samples.iter().map(|&x| 0.7 * x).collect(),
            sample_rate: FS,
        };
        let tiny = |s: &SampleStream| SampleStream {
            samples: s.samples.iter().map(|&x| x * 1e-12).collect(),
            sample_rate: FS,
        };
        let big = WavePair::new(incident.clone(), reflected.clone()).unwrap();
        let small = WavePair::new(tiny(&incident), tiny(&reflected)).unwrap();
        assert_relative_eq!(
            measure_reflection(&big).unwrap(),
            measure_reflection(&small).unwrap(),
            max_relative = 1e-9
        );

        let zeros = SampleStream {
            samples: vec![0.0; n],
            sample_rate: FS,
        };
        let silent = WavePair::new(zeros.clone(), zeros).unwrap();
        assert!(matches!(
            measure_reflection(&silent),
            Err(Error::DegenerateMeasurement)
        ));
    }

    #[test]
    fn frequency_response_follows_the_short_tap_law() {
        let tap_delay = 4e-6;
        let config = ProbeConfig::new(tap_delay, FS);
        let n = RESPONSE_BLOCK as f64;
        let df = FS / n;
        // Pick bin-exact frequencies with an exact 2:1 ratio.
        let f1 = 1_311.0 * df;
        let f2 = 2_622.0 * df;
        let points = probe_frequency_response(&config, &[f1, f2, 3_000.0], 0.0).unwrap();
        assert_relative_eq!(points[0].frequency, f1, max_relative = 1e-12);

        // Doubling the frequency doubles the magnitude while f stays small
        // against 1/tap_delay.
        let ratio = points[1].magnitude / points[0].magnitude;
        let expected = 2.0 * (std::f64::consts::PI * f1 * tap_delay).cos();
        assert_relative_eq!(ratio, expected, max_relative = 0.02);
        assert!((ratio - 2.0).abs() < 0.04);

        // Mid-band phase sits at +90 degrees minus the half-delay droop.
        let phase = points[2].phase_deg;
        let droop = 180.0 * points[2].frequency * tap_delay;
        assert_relative_eq!(phase, 90.0 - droop, max_relative = 1e-6);
        assert!((phase - 90.0).abs() < 5.0);

        // Magnitude vanishes toward zero frequency.
        let low = probe_frequency_response(&config, &[50.0, 500.0], 0.0).unwrap();
        assert!(low[0].magnitude < 0.15 * low[1].magnitude);

        assert!(probe_frequency_response(&config, &[0.0], 0.0).is_err());
        assert!(probe_frequency_response(&config, &[FS], 0.0).is_err());
    }

    #[test]
    fn dc_leak_is_compensated_away() {
        let config = ProbeConfig::new(4e-6, FS);
        let freqs = [500.0, 1_500.0, 3_000.0, 5_500.0];
        let clean = probe_frequency_response(&config, &freqs, 0.0).unwrap();
        let leaky = probe_frequency_response(&config, &freqs, 0.05).unwrap();
        for (c, l) in clean.iter().zip(&leaky) {
            assert_relative_eq!(c.magnitude, l.magnitude, max_relative = 1e-6);
            assert_relative_eq!(c.phase_deg, l.phase_deg, max_relative = 1e-6);
        }
    }
}
