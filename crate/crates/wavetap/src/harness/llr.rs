//! Log-likelihood-ratio histograms: the shape of the detector statistic
//! under both true assignments, for the full correlated detector or for the
//! power-only baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detector::{log_likelihood_ratio, Hypothesis, Observation};
use crate::error::Result;
use crate::line::alpha_from_db;
use crate::noise::derive_seed;

use super::ber::{depaired_observation, paired_observation, DetectorPair, ProbePipeline};
use super::config::{ExperimentConfig, Mode};
use super::tags;

/// Histogram bins per grid point.
pub const LLR_BINS: usize = 61;

/// Per-hypothesis histogram of the detector statistic at one grid point.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LlrHistogram {
    /// One-way line loss in decibels.
    pub loss_db: f64,
    /// Averaging time in correlation-time units.
    pub avg_time_corr_units: usize,
    /// True when the full joint-covariance detector produced the statistic;
    /// false for the power-only baseline (independent components scored by
    /// diagonal models).
    pub correlated: bool,
    /// Statistic samples collected per hypothesis.
    pub samples_per_hypothesis: usize,
    /// Bin edges, `LLR_BINS + 1` ascending values.
    pub bin_edges: Vec<f64>,
    /// Counts under a true [`Hypothesis::C0`].
    pub counts_c0: Vec<u64>,
    /// Counts under a true [`Hypothesis::C1`].
    pub counts_c1: Vec<u64>,
    /// Irreducible decision error implied by the two histograms: half the
    /// summed bin-wise minimum of the two mass fractions. 0 means perfectly
    /// separated; 0.5 means indistinguishable.
    pub overlap: f64,
}

/// Collects the detector statistic under both hypotheses across the loss and
/// averaging grid.
///
/// With `correlated = true` the statistic is the full log-likelihood ratio
/// on jointly observed pairs. With `correlated = false` it is the ratio a
/// power-only eavesdropper can form: the two directional components are
/// observed independently of each other and scored by diagonal models.
pub fn run_llr_histogram(
    config: &ExperimentConfig,
    correlated: bool,
) -> Result<Vec<LlrHistogram>> {
    config.validate()?;
    let pipeline = match config.mode {
        Mode::Analytic => None,
        Mode::Probe => Some(ProbePipeline::prepare(config)?),
    };
    let mut histograms = Vec::new();
    for (li, &loss_db) in config.losses_db.iter().enumerate() {
        let alpha = alpha_from_db(loss_db);
        let full_models = match &pipeline {
            None => DetectorPair::analytic(config, alpha)?,
            Some(p) => p.fit_models(config, li, alpha)?,
        };
        let scoring = if correlated {
            full_models
        } else {
            full_models.diagonal()
        };
        for (ai, &avg) in config.averaging_times.iter().enumerate() {
            let grid_seed = derive_seed(config.seed, tags::with_index(tags::GRID, li, ai));
            let mut per_hyp: Vec<Vec<f64>> = Vec::with_capacity(2);
            for (hi, &truth) in [Hypothesis::C0, Hypothesis::C1].iter().enumerate() {
                let values = collect_llrs(
                    config,
                    &full_models,
                    &scoring,
                    pipeline.as_ref(),
                    alpha,
                    avg,
                    correlated,
                    truth,
                    derive_seed(grid_seed, hi as u64),
                )?;
                per_hyp.push(values);
            }
            let under_c1 = per_hyp.pop().expect("two hypotheses");
            let under_c0 = per_hyp.pop().expect("two hypotheses");
            histograms.push(build_histogram(
                loss_db, avg, correlated, &under_c0, &under_c1,
            ));
        }
    }
    Ok(histograms)
}

/// Detector statistic over all trials of one grid point under one truth.
#[allow(clippy::too_many_arguments)]
fn collect_llrs(
    config: &ExperimentConfig,
    full_models: &DetectorPair,
    scoring: &DetectorPair,
    pipeline: Option<&ProbePipeline>,
    alpha: f64,
    avg: usize,
    correlated: bool,
    truth: Hypothesis,
    stream_seed: u64,
) -> Result<Vec<f64>> {
    // The baseline consumes twice the pairs so that the two components of
    // each scored pair come from disjoint (hence independent) samples.
    let consumed = if correlated { avg } else { 2 * avg };
    let band = match pipeline {
        Some(p) => Some(config.band(p.block_len(consumed))?),
        None => None,
    };
    (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let trial_seed = derive_seed(stream_seed, trial as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let obs = match pipeline {
                None => {
                    if correlated {
                        paired_observation(full_models.model_for(truth), avg, &mut rng)
                    } else {
                        depaired_observation(full_models.model_for(truth), avg, &mut rng)
                    }
                }
                Some(p) => {
                    let line = config.line_config(truth, alpha);
                    let pairs = p.pairs_from_exchange(
                        &line,
                        band.as_ref().expect("band exists in probe mode"),
                        derive_seed(trial_seed, tags::EXCHANGE),
                        consumed,
                    )?;
                    if correlated {
                        Observation::new(pairs)?
                    } else {
                        // Pair each right-wave sample with a left-wave sample
                        // from a different correlation slot.
                        Observation::new(
                            (0..avg).map(|i| (pairs[i].0, pairs[avg + i].1)).collect(),
                        )?
                    }
                }
            };
            Ok(log_likelihood_ratio(&scoring.m0, &scoring.m1, &obs))
        })
        .collect()
}

/// Bins the two statistic samples onto a common axis and summarises their
/// overlap.
fn build_histogram(
    loss_db: f64,
    avg: usize,
    correlated: bool,
    under_c0: &[f64],
    under_c1: &[f64],
) -> LlrHistogram {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in under_c0.iter().chain(under_c1) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if hi <= lo {
        // Degenerate case (identical statistics, e.g. a lossless line):
        // spread a unit window around the single value.
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / LLR_BINS as f64;
    let bin_of = |x: f64| (((x - lo) / width) as usize).min(LLR_BINS - 1);
    let mut counts_c0 = vec![0u64; LLR_BINS];
    let mut counts_c1 = vec![0u64; LLR_BINS];
    for &x in under_c0 {
        counts_c0[bin_of(x)] += 1;
    }
    for &x in under_c1 {
        counts_c1[bin_of(x)] += 1;
    }
    let samples = under_c0.len();
    let overlap = 0.5
        * counts_c0
            .iter()
            .zip(&counts_c1)
            .map(|(&a, &b)| a.min(b) as f64)
            .sum::<f64>()
        / samples as f64;
    LlrHistogram {
        loss_db,
        avg_time_corr_units: avg,
        correlated,
        samples_per_hypothesis: samples,
        bin_edges: (0..=LLR_BINS).map(|i| lo + i as f64 * width).collect(),
        counts_c0,
        counts_c1,
        overlap,
    }
}
