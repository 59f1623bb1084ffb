//! Bit-error-rate experiment: how often the directional eavesdropper decodes
//! the wrong key bit, swept over line loss and averaging time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::detector::{
    decide, fit_model, GaussianModel, Hypothesis, Observation,
};
use crate::error::Result;
use crate::line::{alpha_from_db, reflection_coefficients, simulate_exchange, LineConfig};
use crate::noise::{derive_seed, generate_band_limited_noise, BandSpec, SampleStream};
use crate::probe::{
    decompose, lms_calibrate, synthesize_tap_signals, undo_first_difference, ProbeConfig,
    ProbeState,
};

use super::config::{ExperimentConfig, Mode};
use super::{
    harness_probe_config, tags, CALIBRATION_SAMPLES, DECIMATION_SKIP, MODEL_FIT_EXCHANGES,
    MODEL_FIT_SAMPLES, NOISE_SCALE,
};

/// One grid point of a bit-error-rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BerPoint {
    /// One-way line loss in decibels.
    pub loss_db: f64,
    /// Averaging time in correlation-time units (independent pairs used).
    pub avg_time_corr_units: usize,
    /// Monte-Carlo decisions taken.
    pub trials: usize,
    /// Wrong decisions among them.
    pub errors: usize,
    /// Empirical bit error rate `errors / trials`.
    pub ber: f64,
    /// Lower edge of the 95% Wilson score interval.
    pub ci95_low: f64,
    /// Upper edge of the 95% Wilson score interval.
    pub ci95_high: f64,
}

impl BerPoint {
    /// Assembles a grid point from raw counts.
    pub fn from_counts(loss_db: f64, avg_time: usize, trials: usize, errors: usize) -> BerPoint {
        let (ci95_low, ci95_high) = wilson_interval(errors, trials);
        BerPoint {
            loss_db,
            avg_time_corr_units: avg_time,
            trials,
            errors,
            ber: errors as f64 / trials as f64,
            ci95_low,
            ci95_high,
        }
    }
}

/// 95% Wilson score interval for a binomial proportion. Unlike the normal
/// approximation it behaves sensibly at zero observed errors.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.96;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (
        (centre - half).max(0.0),
        (centre + half).min(1.0),
    )
}

/// The two candidate observation models a detector discriminates between.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DetectorPair {
    pub m0: GaussianModel,
    pub m1: GaussianModel,
}

impl DetectorPair {
    /// Closed-form models from the line's theoretical wave covariance.
    pub fn analytic(config: &ExperimentConfig, alpha: f64) -> Result<DetectorPair> {
        let model_for = |hyp: Hypothesis| -> Result<GaussianModel> {
            let line = config.line_config(hyp, alpha);
            let gammas = reflection_coefficients(&line)?;
            let cov = crate::line::theoretical_covariance(gammas, alpha, NOISE_SCALE)?;
            GaussianModel::from_covariance(cov)
        };
        Ok(DetectorPair {
            m0: model_for(Hypothesis::C0)?,
            m1: model_for(Hypothesis::C1)?,
        })
    }

    /// Power-only variant of both models (zero cross-covariance).
    pub fn diagonal(&self) -> DetectorPair {
        DetectorPair {
            m0: self.m0.diagonal_baseline(),
            m1: self.m1.diagonal_baseline(),
        }
    }

    /// Model under which observations with the given true assignment are
    /// distributed.
    pub fn model_for(&self, truth: Hypothesis) -> &GaussianModel {
        match truth {
            Hypothesis::C0 => &self.m0,
            Hypothesis::C1 => &self.m1,
        }
    }
}

/// Observation of `count` jointly sampled `(v_plus, v_minus)` pairs under a
/// model.
pub(crate) fn paired_observation<R: Rng + ?Sized>(
    model: &GaussianModel,
    count: usize,
    rng: &mut R,
) -> Observation {
    Observation::new((0..count).map(|_| model.sample(rng)).collect())
        .expect("model samples are finite and non-empty")
}

/// Observation whose two components are sampled independently from the
/// marginals of a model: what a power-only eavesdropper effectively sees.
pub(crate) fn depaired_observation<R: Rng + ?Sized>(
    model: &GaussianModel,
    count: usize,
    rng: &mut R,
) -> Observation {
    let sd_plus = model.covariance().c_pp.sqrt();
    let sd_minus = model.covariance().c_mm.sqrt();
    Observation::new(
        (0..count)
            .map(|_| {
                (
                    sd_plus * rng.sample::<f64, _>(StandardNormal),
                    sd_minus * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect(),
    )
    .expect("model samples are finite and non-empty")
}

/// Calibrated probe plus everything needed to turn one exchange into
/// decimated observation pairs.
pub(crate) struct ProbePipeline {
    pub probe: ProbeConfig,
    pub state: ProbeState,
    pub f_low: f64,
    pub f_high: f64,
    pub step: usize,
}

impl ProbePipeline {
    /// Calibrates the harness probe on a right-only fixture derived from the
    /// run seed.
    pub fn prepare(config: &ExperimentConfig) -> Result<ProbePipeline> {
        let probe = harness_probe_config(config.sample_rate);
        probe.validate_for_band(config.f_high)?;
        let band = config.band(CALIBRATION_SAMPLES)?;
        let plus = generate_band_limited_noise(
            &band,
            1.0,
            derive_seed(config.seed, tags::CALIBRATION),
        )?;
        let minus = SampleStream {
            samples: vec![0.0; CALIBRATION_SAMPLES],
            sample_rate: config.sample_rate,
        };
        let taps =
            synthesize_tap_signals(&crate::line::WavePair::new(plus, minus)?, &probe)?;
        let state = lms_calibrate(&taps, &probe)?;
        Ok(ProbePipeline {
            probe,
            state,
            f_low: config.f_low,
            f_high: config.f_high,
            step: config.correlation_step(),
        })
    }

    /// Stream length for a block from which `count` pairs will be taken.
    ///
    /// Blocks are kept several times longer than the consumed span so that
    /// the generator's exact-variance rescaling, which pins the power of
    /// each finite stream, does not suppress the trial-to-trial power
    /// fluctuations the detector relies on.
    pub fn block_len(&self, count: usize) -> usize {
        let consumed = DECIMATION_SKIP + count * self.step;
        (8 * consumed).max(4096).next_power_of_two()
    }

    /// Runs the full chain on one exchange and extracts decimated pairs:
    /// simulate, tap, decompose, restore the wave domain, decimate.
    pub fn pairs_from_exchange(
        &self,
        line: &LineConfig,
        band: &BandSpec,
        seed: u64,
        count: usize,
    ) -> Result<Vec<(f64, f64)>> {
        let waves = simulate_exchange(line, band, seed)?;
        let taps = synthesize_tap_signals(&waves, &self.probe)?;
        let separated = decompose(&taps, &self.state, &self.probe)?;
        let restored = undo_first_difference(&separated, self.f_low, self.f_high)?;
        restored.decimated_pairs(DECIMATION_SKIP, self.step, count)
    }

    /// Fits both hypothesis models through the same signal chain the trials
    /// use, from [`MODEL_FIT_EXCHANGES`] long exchanges per hypothesis.
    pub fn fit_models(
        &self,
        config: &ExperimentConfig,
        loss_index: usize,
        alpha: f64,
    ) -> Result<DetectorPair> {
        let band = config.band(MODEL_FIT_SAMPLES)?;
        let count = (MODEL_FIT_SAMPLES - DECIMATION_SKIP - 1) / self.step;
        let jobs: Vec<(usize, Hypothesis, usize)> = [Hypothesis::C0, Hypothesis::C1]
            .iter()
            .enumerate()
            .flat_map(|(hi, &hyp)| (0..MODEL_FIT_EXCHANGES).map(move |rep| (hi, hyp, rep)))
            .collect();
        let batches: Vec<(usize, Vec<(f64, f64)>)> = jobs
            .par_iter()
            .map(|&(hi, hyp, rep)| -> Result<(usize, Vec<(f64, f64)>)> {
                let line = config.line_config(hyp, alpha);
                let seed = derive_seed(
                    config.seed,
                    tags::with_index(tags::MODEL_FIT, loss_index * 2 + hi, rep),
                );
                Ok((hi, self.pairs_from_exchange(&line, &band, seed, count)?))
            })
            .collect::<Result<_>>()?;
        let mut per_hyp = [Vec::new(), Vec::new()];
        for (hi, mut pairs) in batches {
            per_hyp[hi].append(&mut pairs);
        }
        let [pairs0, pairs1] = per_hyp;
        Ok(DetectorPair {
            m0: fit_model(&Observation::new(pairs0)?)?,
            m1: fit_model(&Observation::new(pairs1)?)?,
        })
    }
}

/// Runs the full bit-error-rate sweep described by the configuration.
///
/// Every trial draws a uniformly random true assignment, forms an
/// observation of `avg_time` pairs in the configured mode, runs the
/// maximum-likelihood detector, and counts disagreements. Results are
/// deterministic in `(config, seed)` regardless of thread count.
pub fn run_ber_experiment(config: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    config.validate()?;
    let pipeline = match config.mode {
        Mode::Analytic => None,
        Mode::Probe => Some(ProbePipeline::prepare(config)?),
    };
    let mut points = Vec::new();
    for (li, &loss_db) in config.losses_db.iter().enumerate() {
        let alpha = alpha_from_db(loss_db);
        let models = match &pipeline {
            None => DetectorPair::analytic(config, alpha)?,
            Some(p) => p.fit_models(config, li, alpha)?,
        };
        for (ai, &avg) in config.averaging_times.iter().enumerate() {
            let grid_seed = derive_seed(config.seed, tags::with_index(tags::GRID, li, ai));
            let errors =
                grid_point_errors(config, &models, pipeline.as_ref(), alpha, avg, grid_seed)?;
            points.push(BerPoint::from_counts(loss_db, avg, config.trials, errors));
        }
    }
    Ok(points)
}

/// Error count over all trials of one `(loss, averaging-time)` grid point.
fn grid_point_errors(
    config: &ExperimentConfig,
    models: &DetectorPair,
    pipeline: Option<&ProbePipeline>,
    alpha: f64,
    avg: usize,
    grid_seed: u64,
) -> Result<usize> {
    let band = match pipeline {
        Some(p) => Some(config.band(p.block_len(avg))?),
        None => None,
    };
    (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            let trial_seed = derive_seed(grid_seed, trial as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let truth = if rng.random_range(0..2u32) == 0 {
                Hypothesis::C0
            } else {
                Hypothesis::C1
            };
            let obs = match pipeline {
                None => paired_observation(models.model_for(truth), avg, &mut rng),
                Some(p) => {
                    let line = config.line_config(truth, alpha);
                    let pairs = p.pairs_from_exchange(
                        &line,
                        band.as_ref().expect("band exists in probe mode"),
                        derive_seed(trial_seed, tags::EXCHANGE),
                        avg,
                    )?;
                    Observation::new(pairs)?
                }
            };
            let decision = decide(&models.m0, &models.m1, &obs);
            Ok(usize::from(decision.hypothesis != truth))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config(losses: Vec<f64>, avg: Vec<usize>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            losses_db: losses,
            averaging_times: avg,
            trials,
            seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn wilson_interval_behaves_at_the_edges() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.06);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(hi > 1.0 - 1e-12);
        assert!(lo > 0.94);
        // Symmetric case brackets the point estimate symmetrically.
        let (lo, hi) = wilson_interval(50, 100);
        assert_relative_eq!(lo + hi, 1.0, max_relative = 1e-12);
        assert!(lo < 0.5 && hi > 0.5);
        // Interval always contains the point estimate.
        let (lo, hi) = wilson_interval(3, 1_000);
        assert!(lo < 0.003 && hi > 0.003);
    }

    #[test]
    fn analytic_sweep_is_deterministic_and_accurate() {
        let config = small_config(vec![1.0], vec![20], 4_000);
        let first = run_ber_experiment(&config).unwrap();
        let second = run_ber_experiment(&config).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.len(), 1);
        let point = first[0];
        assert_eq!(point.trials, 4_000);
        assert_relative_eq!(point.ber, point.errors as f64 / point.trials as f64);
        // The true error rate at 1 dB and 20 pairs is around 2e-4.
        assert!(point.ber < 0.005, "ber unexpectedly high: {}", point.ber);
        assert!(point.ci95_low <= point.ber && point.ber <= point.ci95_high);
    }

    #[test]
    fn lossless_line_forces_chance_performance() {
        let config = small_config(vec![0.0], vec![1, 10], 2_000);
        let points = run_ber_experiment(&config).unwrap();
        for point in points {
            assert!(
                (0.45..0.55).contains(&point.ber),
                "lossless ber {} should sit at chance",
                point.ber
            );
        }
    }

    #[test]
    fn heavier_loss_means_fewer_errors() {
        let config = small_config(vec![0.01, 1.0], vec![20], 3_000);
        let points = run_ber_experiment(&config).unwrap();
        assert!(points[0].ber > points[1].ber);
    }

    #[test]
    fn different_seeds_shuffle_the_counts() {
        let base = small_config(vec![0.1], vec![5], 2_000);
        let mut other = base.clone();
        other.seed = 8;
        let a = run_ber_experiment(&base).unwrap();
        let b = run_ber_experiment(&other).unwrap();
        assert_ne!(a[0].errors, b[0].errors);
    }
}
