//! Covariances, Wald intervals and bootstrap bands for predicted probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{EmaxError, Result};
use crate::estimators::{penalized_observed_information, EstimatorKind, FitStatus, SolverConfig, SINGULAR_RCOND};
use crate::linalg::{self, Mat3};
use crate::model::{hessian, predict_prob, DoseGroup, EmaxParams, ObservationSet};

/// `[-H]^{-1}` for the likelihood-based estimators, `[O*]^{-1}` for MPLE.
pub fn covariance(kind: EstimatorKind, params: &EmaxParams, data: &ObservationSet) -> Result<Mat3> {
    let info = match kind {
        EstimatorKind::Mple => penalized_observed_information(params, data)?,
        _ => -hessian(params, data),
    };
    linalg::guarded_inverse(&info, SINGULAR_RCOND).ok_or(EmaxError::SingularInformation)
}

/// Two-sided standard normal quantile `z` with `P(|Z| <= z) = level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EmaxError::InvalidLevel(level));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub estimate: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl WaldInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

pub fn wald_ci(estimate: f64, se: f64, level: f64) -> Result<WaldInterval> {
    let z = normal_quantile(level)?;
    if !(se > 0.0 && se.is_finite()) || !estimate.is_finite() {
        return Err(EmaxError::InvalidData(format!("standard error must be positive and finite, got {se}")));
    }
    Ok(WaldInterval { estimate, std_err: se, lower: estimate - z * se, upper: estimate + z * se, level })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub dose: f64,
    /// Prediction from the fit on the original data.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_boot: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    pub kind: EstimatorKind,
    pub level: f64,
    pub method: String,
    pub n_failed: usize,
    pub bands: Vec<BootstrapBand>,
}

/// Per-replicate generator: one ChaCha stream per replicate index.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Resamples subjects with replacement inside each arm; arm sizes are kept.
pub fn stratified_resample(arms: &[DoseGroup], rng: &mut ChaCha8Rng) -> Vec<DoseGroup> {
    use rand::Rng;
    arms.iter()
        .map(|a| {
            let mut events = 0;
            for _ in 0..a.n {
                // Drawing a subject uniformly from the arm is a Bernoulli(p) draw.
                if rng.random_range(0..a.n) < a.events {
                    events += 1;
                }
            }
            DoseGroup { dose: a.dose, n: a.n, events }
        })
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // Type 7 quantile (linear interpolation between order statistics).
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Stratified nonparametric bootstrap with percentile bands of `predict_prob`.
pub fn bootstrap_bands(
    data: &ObservationSet,
    kind: EstimatorKind,
    doses: &[f64],
    n_boot: usize,
    seed: u64,
    level: f64,
    config: &SolverConfig,
) -> Result<BootstrapOutcome> {
    normal_quantile(level)?;
    if n_boot == 0 {
        return Err(EmaxError::InvalidConfig("n_boot must be at least 1".into()));
    }
    let base = kind.fit(data, config);
    let point = base.params.ok_or(EmaxError::TooManyFailures { failed: 1, total: 1 })?;
    let arms = data.arms();

    let draws: Vec<Option<Vec<f64>>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let sample = ObservationSet::from_groups(stratified_resample(&arms, &mut rng)).ok()?;
            let fit = kind.fit(&sample, config);
            if fit.status == FitStatus::FailedToEstimate {
                return None;
            }
            let p = fit.params?;
            Some(doses.iter().map(|&d| predict_prob(&p, d)).collect())
        })
        .collect();

    let n_failed = draws.iter().filter(|d| d.is_none()).count();
    if 2 * n_failed > n_boot {
        return Err(EmaxError::TooManyFailures { failed: n_failed, total: n_boot });
    }
    let kept: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let alpha = (1.0 - level) / 2.0;
    let bands = doses
        .iter()
        .enumerate()
        .map(|(j, &dose)| {
            let mut col: Vec<f64> = kept.iter().map(|v| v[j]).collect();
            col.sort_by(f64::total_cmp);
            BootstrapBand {
                dose,
                point: predict_prob(&point, dose),
                lower: percentile(&col, alpha),
                upper: percentile(&col, 1.0 - alpha),
                n_boot,
                seed,
            }
        })
        .collect();
    Ok(BootstrapOutcome { kind, level, method: "percentile, stratified by arm".into(), n_failed, bands })
}
