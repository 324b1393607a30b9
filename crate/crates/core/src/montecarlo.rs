//! Monte Carlo estimation of the coefficient-recovery risk.
//!
//! Trial `i` draws from its own ChaCha stream `(seed, i)`, so the sample
//! stream does not depend on scheduling or worker count, and the mean is
//! reduced in trial order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{apply_features, least_squares, weighted_minnorm, SolverPath};
use crate::model::{GridConfig, Spectrum};
use crate::risk::concentration_bound;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientModel {
    /// Circularly symmetric complex Gaussian coordinates.
    #[default]
    ComplexGaussian,
    RealGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub coefficient_model: CoefficientModel,
    /// Central mass of the percentile interval.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    0.8
}

impl McConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            coefficient_model: CoefficientModel::ComplexGaussian,
            confidence: default_confidence(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfiguration("trials must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }

    /// Generator for one trial; independent of every other trial.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRiskEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Per-trial `||theta - theta_hat||^2`, in trial order.
    pub samples: Vec<f64>,
}

/// Draws `theta` with `E[theta] = 0` and `E[theta theta^*] = c_r Sigma^2r`.
pub fn sample_theta<R: rand::Rng + ?Sized>(
    spectrum: &Spectrum,
    model: CoefficientModel,
    rng: &mut R,
) -> Vec<Complex64> {
    let c = spectrum.c_r().sqrt();
    let r = spectrum.decay_r();
    (0..spectrum.dim())
        .map(|j| {
            let sd = c * spectrum.pow(j, r);
            match model {
                CoefficientModel::ComplexGaussian => {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im) * (sd * std::f64::consts::FRAC_1_SQRT_2)
                }
                CoefficientModel::RealGaussian => {
                    let g: f64 = StandardNormal.sample(rng);
                    Complex64::new(sd * g, 0.0)
                }
            }
        })
        .collect()
}

/// One trial: sample, observe through the full model, fit, score.
fn trial_error(
    spectrum: &Spectrum,
    grid: &GridConfig,
    q: f64,
    mc: &McConfig,
    trial: usize,
) -> Result<f64> {
    let mut rng = mc.trial_rng(trial);
    let theta = sample_theta(spectrum, mc.coefficient_model, &mut rng);
    let y = apply_features(grid.n, &theta);
    let fit = if grid.p <= grid.n {
        least_squares(&y, grid)?
    } else {
        let path = if grid.l.is_some() {
            SolverPath::CirculantFft
        } else {
            SolverPath::DenseSvd
        };
        weighted_minnorm(&y, spectrum, grid, q, path)?
    };
    Ok(theta
        .iter()
        .zip(&fit.theta_hat)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum())
}

/// Per-trial errors, computed in parallel on the current rayon pool.
pub fn risk_samples(
    spectrum: &Spectrum,
    grid: &GridConfig,
    q: f64,
    mc: &McConfig,
) -> Result<Vec<f64>> {
    mc.validate()?;
    (0..mc.trials)
        .into_par_iter()
        .map(|i| trial_error(spectrum, grid, q, mc, i))
        .collect()
}

/// Linearly interpolated order statistic.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical mean and percentile interval of `||theta - theta_hat||^2`.
///
/// Least squares is used for `p <= n`, the weighted min-norm estimator
/// otherwise. The interval is widened to contain the mean in the rare case
/// a skewed sample pushes the mean outside the central percentiles.
pub fn empirical_risk(
    spectrum: &Spectrum,
    grid: &GridConfig,
    q: f64,
    mc: &McConfig,
) -> Result<McRiskEstimate> {
    let samples = risk_samples(spectrum, grid, q, mc)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - mc.confidence) / 2.0;
    let ci_low = quantile(&sorted, tail).min(mean);
    let ci_high = quantile(&sorted, 1.0 - tail).max(mean);
    Ok(McRiskEstimate {
        mean,
        ci_low,
        ci_high,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub t: f64,
    /// Fraction of trials with `|sample - mean| > t`.
    pub empirical_tail: f64,
    /// `min(1, 2 exp(-min(t^2/T_q^2, t/T_q)))`.
    pub bound_tail: f64,
    /// Binomial standard error of a frequency with rate `bound_tail`.
    pub std_error: f64,
}

impl ConcentrationRow {
    pub fn dominated(&self) -> bool {
        self.empirical_tail <= self.bound_tail + 3.0 * self.std_error
    }
}

/// Empirical deviation frequencies next to the sub-Gaussian tail bound.
pub fn concentration_check(
    spectrum: &Spectrum,
    grid: &GridConfig,
    q: f64,
    t_grid: &[f64],
    mc: &McConfig,
) -> Result<Vec<ConcentrationRow>> {
    let r = spectrum.decay_r();
    if !(q > 0.5) || r < q {
        return Err(Error::OutOfRegime(format!(
            "concentration check needs r >= q > 1/2, got r={r} q={q}"
        )));
    }
    if grid.p < grid.n {
        return Err(Error::WrongRegime(format!(
            "concentration check needs p >= n, got p={} n={}",
            grid.p, grid.n
        )));
    }
    let samples = risk_samples(spectrum, grid, q, mc)?;
    let trials = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / trials;
    t_grid
        .iter()
        .map(|&t| {
            let (_, tail) = concentration_bound(r, q, t)?;
            let bound_tail = tail.min(1.0);
            let exceed = samples.iter().filter(|&&s| (s - mean).abs() > t).count();
            Ok(ConcentrationRow {
                t,
                empirical_tail: exceed as f64 / trials,
                bound_tail,
                std_error: (bound_tail * (1.0 - bound_tail) / trials).sqrt(),
            })
        })
        .collect()
}
