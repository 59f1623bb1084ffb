//! Bayesian discrimination of the resistor assignment from directional-wave
//! observations.
//!
//! Each observation is a set of `(v_plus, v_minus)` pairs spaced one
//! correlation time apart, so the pairs are modelled as independent draws
//! from a zero-mean bivariate Gaussian whose covariance depends on which
//! party holds the high resistor. The detector evaluates the exact Gaussian
//! log-likelihood under both candidate models through a cached Cholesky
//! factor and picks the hypothesis with the larger likelihood, which is the
//! minimum-error rule under a uniform prior.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::line::Covariance2;

/// `ln(2 * pi)`, the normalisation constant of a bivariate standard normal.
const LN_TWO_PI: f64 = 1.8378770664093453;

/// Minimum number of pairs accepted by [`fit_model`].
pub const MIN_FIT_PAIRS: usize = 100;

/// The two possible resistor assignments in one exchange interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Hypothesis {
    /// Port A holds the high resistor, port B the low one.
    C0,
    /// Port A holds the low resistor, port B the high one.
    C1,
}

impl Hypothesis {
    /// The opposite assignment.
    pub fn flipped(self) -> Hypothesis {
        match self {
            Hypothesis::C0 => Hypothesis::C1,
            Hypothesis::C1 => Hypothesis::C0,
        }
    }

    /// Stable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::C0 => "c0",
            Hypothesis::C1 => "c1",
        }
    }
}

/// A zero-mean bivariate Gaussian observation model with a cached Cholesky
/// factorisation of its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    covariance: Covariance2,
    k11: f64,
    k21: f64,
    k22: f64,
    log_det: f64,
}

impl GaussianModel {
    /// Builds a model from a covariance matrix.
    ///
    /// # Errors
    ///
    /// Returns [`Error::DegenerateData`] when the covariance is not strictly
    /// positive definite, since the Gaussian density does not exist there.
    pub fn from_covariance(covariance: Covariance2) -> Result<Self> {
        let finite = covariance.c_pp.is_finite()
            && covariance.c_mm.is_finite()
            && covariance.c_pm.is_finite();
        if !finite || !covariance.is_positive_definite() {
            return Err(Error::DegenerateData(format!(
                "covariance is not positive definite: {covariance:?}"
            )));
        }
        let k11 = covariance.c_pp.sqrt();
        let k21 = covariance.c_pm / k11;
        let rest = covariance.c_mm - k21 * k21;
        if rest <= 0.0 {
            return Err(Error::DegenerateData(format!(
                "covariance is not positive definite: {covariance:?}"
            )));
        }
        let k22 = rest.sqrt();
        Ok(GaussianModel {
            covariance,
            k11,
            k21,
            k22,
            log_det: 2.0 * (k11.ln() + k22.ln()),
        })
    }

    /// The covariance this model was built from.
    pub fn covariance(&self) -> Covariance2 {
        self.covariance
    }

    /// Lower-triangular Cholesky factor `(k11, k21, k22)` with
    /// `K * K^T = covariance`.
    pub fn cholesky_factors(&self) -> (f64, f64, f64) {
        (self.k11, self.k21, self.k22)
    }

    /// Log-determinant of the covariance.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `K z = x` for one observation pair, mapping it to whitened
    /// coordinates in which the model is a standard normal.
    fn whiten(&self, pair: (f64, f64)) -> (f64, f64) {
        let z1 = pair.0 / self.k11;
        let z2 = (pair.1 - self.k21 * z1) / self.k22;
        (z1, z2)
    }

    /// Draws one pair distributed according to this model.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (self.k11 * z1, self.k21 * z1 + self.k22 * z2)
    }

    /// Model with the same directional variances but zero cross-covariance:
    /// the information available to an eavesdropper who measures only the
    /// two directional powers and ignores their joint structure.
    pub fn diagonal_baseline(&self) -> GaussianModel {
        GaussianModel::from_covariance(Covariance2 {
            c_pp: self.covariance.c_pp,
            c_mm: self.covariance.c_mm,
            c_pm: 0.0,
        })
        .expect("diagonal of a positive definite matrix is positive definite")
    }
}

/// A set of simultaneous `(v_plus, v_minus)` pairs treated as independent
/// draws from one observation model.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pairs: Vec<(f64, f64)>,
}

impl Observation {
    /// Wraps a pair list, requiring at least one finite pair.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter(
                "observation must contain at least one pair".to_string(),
            ));
        }
        if pairs.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidParameter(
                "observation contains non-finite samples".to_string(),
            ));
        }
        Ok(Observation { pairs })
    }

    /// Borrow the underlying pairs.
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// True when no pairs are present (unreachable through [`Observation::new`]).
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Outcome of one detection: the chosen hypothesis, the log-likelihood ratio
/// in favour of [`Hypothesis::C0`], and the corresponding posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// Maximum-likelihood hypothesis; ties resolve to [`Hypothesis::C0`].
    pub hypothesis: Hypothesis,
    /// `log L(C0) - log L(C1)` over the whole observation.
    pub llr: f64,
    /// Posterior probability of [`Hypothesis::C0`] under a uniform prior.
    pub posterior_c0: f64,
}

/// Fits a zero-mean Gaussian model to observed pairs by their raw second
/// moments.
///
/// # Errors
///
/// Returns [`Error::InvalidParameter`] for fewer than [`MIN_FIT_PAIRS`]
/// pairs (the moments would be too noisy to trust) and
/// [`Error::DegenerateData`] when the sample covariance is not positive
/// definite.
pub fn fit_model(obs: &Observation) -> Result<GaussianModel> {
    fit_model_regularized(obs, 0.0)
}

/// Like [`fit_model`], but adds `epsilon` to both diagonal entries before
/// factorising. Useful when observations are nearly rank-deficient; the
/// default experiment paths use `epsilon = 0`.
pub fn fit_model_regularized(obs: &Observation, epsilon: f64) -> Result<GaussianModel> {
    if obs.len() < MIN_FIT_PAIRS {
        return Err(Error::InvalidParameter(format!(
            "model fit needs at least {MIN_FIT_PAIRS} pairs, got {}",
            obs.len()
        )));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "regularisation epsilon must be non-negative, got {epsilon}"
        )));
    }
    let n = obs.len() as f64;
    let mut c_pp = 0.0;
    let mut c_mm = 0.0;
    let mut c_pm = 0.0;
    for &(p, m) in obs.pairs() {
        c_pp += p * p;
        c_mm += m * m;
        c_pm += p * m;
    }
    GaussianModel::from_covariance(Covariance2 {
        c_pp: c_pp / n + epsilon,
        c_mm: c_mm / n + epsilon,
        c_pm: c_pm / n,
    })
}

/// Exact Gaussian log-likelihood of an observation under a model, summed
/// over pairs:
///
/// ```text
/// sum_i [ -1/2 * ln det(C) - ln(2 pi) - 1/2 * |K^-1 x_i|^2 ]
/// ```
pub fn log_likelihood(model: &GaussianModel, obs: &Observation) -> f64 {
    let constant = -0.5 * model.log_det() - LN_TWO_PI;
    obs.pairs()
        .iter()
        .map(|&pair| {
            let (z1, z2) = model.whiten(pair);
            constant - 0.5 * (z1 * z1 + z2 * z2)
        })
        .sum()
}

/// Log-likelihood ratio `log L(model_c0) - log L(model_c1)`.
pub fn log_likelihood_ratio(
    model_c0: &GaussianModel,
    model_c1: &GaussianModel,
    obs: &Observation,
) -> f64 {
    log_likelihood(model_c0, obs) - log_likelihood(model_c1, obs)
}

/// Posterior probability of [`Hypothesis::C0`] under a uniform prior,
/// computed from the log-likelihood ratio in a way that saturates cleanly
/// instead of overflowing for extreme ratios.
pub fn posterior_c0(llr: f64) -> f64 {
    // 1 / (1 + exp(-llr)); exp never overflows because the argument is
    // clamped to the negative half-line.
    if llr >= 0.0 {
        1.0 / (1.0 + (-llr).exp())
    } else {
        let e = llr.exp();
        e / (1.0 + e)
    }
}

/// Runs the maximum-likelihood decision rule on one observation.
///
/// Ties (`llr == 0`, which happens with identical models) resolve to
/// [`Hypothesis::C0`], so a blind detector is wrong exactly as often as the
/// true assignment is [`Hypothesis::C1`].
pub fn decide(
    model_c0: &GaussianModel,
    model_c1: &GaussianModel,
    obs: &Observation,
) -> Decision {
    let llr = log_likelihood_ratio(model_c0, model_c1, obs);
    Decision {
        hypothesis: if llr >= 0.0 {
            Hypothesis::C0
        } else {
            Hypothesis::C1
        },
        llr,
        posterior_c0: posterior_c0(llr),
    }
}
