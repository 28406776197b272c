//! The four estimators and the shared fit/classification machinery.

pub(crate) mod ascent;
mod cox_snell;
mod firth;
mod mle;
mod mple;
mod start;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EmaxError, Result};
use crate::linalg::{self, Mat3};
use crate::model::{EmaxParams, ObservationSet};

pub use cox_snell::{cox_snell_bias, cox_snell_contract, fit_cox_snell};
pub use firth::{firth_adjustment, firth_modified_score, fit_firth};
pub use mle::{boundary_loglik, fit_mle};
pub use mple::{fit_mple, penalized_loglik, penalized_observed_information, penalized_score};
pub use start::{starting_values, StartingValues};

/// Reciprocal-condition floor below which an information matrix counts as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    CoxSnell,
    Firth,
    Mple,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Mle, Self::CoxSnell, Self::Firth, Self::Mple];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mle => "mle",
            Self::CoxSnell => "coxsnell",
            Self::Firth => "firth",
            Self::Mple => "mple",
        }
    }

    /// Display label used in tables.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Mle => "MLE",
            Self::CoxSnell => "Cox-Snell",
            Self::Firth => "Firth",
            Self::Mple => "MPLE",
        }
    }

    pub fn fit(&self, data: &ObservationSet, config: &SolverConfig) -> FitResult {
        match self {
            Self::Mle => fit_mle(data, config),
            Self::CoxSnell => fit_cox_snell(data, config),
            Self::Firth => fit_firth(data, config),
            Self::Mple => fit_mple(data, config),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = EmaxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mle" => Ok(Self::Mle),
            "coxsnell" | "cox" => Ok(Self::CoxSnell),
            "firth" => Ok(Self::Firth),
            "mple" | "jeffreys" => Ok(Self::Mple),
            other => Err(EmaxError::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub rel_change_tol: f64,
    pub max_iter: usize,
    /// Upper ED50 stability bound as a multiple of the largest dose.
    pub ed50_upper_mult: f64,
    /// Lower ED50 stability bound as a multiple of the smallest positive dose.
    pub ed50_lower_mult: f64,
    pub rel_se_threshold: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            rel_change_tol: 1e-8,
            max_iter: 2000,
            ed50_upper_mult: 10.0,
            ed50_lower_mult: 0.02,
            rel_se_threshold: 5.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = vec![];
        if !(self.grad_tol > 0.0) {
            bad.push("grad_tol");
        }
        if !(self.rel_change_tol > 0.0) {
            bad.push("rel_change_tol");
        }
        if self.max_iter < 1 {
            bad.push("max_iter");
        }
        if !(self.ed50_upper_mult > 0.0) {
            bad.push("ed50_upper_mult");
        }
        if !(self.ed50_lower_mult > 0.0) {
            bad.push("ed50_lower_mult");
        }
        if !(self.rel_se_threshold > 0.0) {
            bad.push("rel_se_threshold");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(EmaxError::InvalidConfig(format!("invalid solver settings: {}", bad.join(", "))))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    Unstable,
    FailedToEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusReason {
    /// Iteration budget exhausted.
    NonConvergence,
    /// Objective, estimating equation or parameters became non-finite.
    NonFinite,
    /// Curvature or information matrix singular at the final iterate.
    SingularInformation,
    /// The data do not support a fit (too few dose levels, no positive dose).
    InvalidData,
    /// The likelihood supremum lies on the boundary of the parameter space.
    NoInteriorMaximum,
    Ed50BoundHit,
    UndefinedStdError,
    RelativeSeExceeded,
}

impl StatusReason {
    pub fn describe(&self) -> &'static str {
        match self {
            Self::NonConvergence => "iteration limit reached without convergence",
            Self::NonFinite => "non-finite objective or parameters",
            Self::SingularInformation => "singular information at the final iterate",
            Self::InvalidData => "data do not support an Emax fit",
            Self::NoInteriorMaximum => "likelihood supremum on the parameter-space boundary; the MLE does not exist",
            Self::Ed50BoundHit => "ED50 outside the stability bounds",
            Self::UndefinedStdError => "undefined standard error",
            Self::RelativeSeExceeded => "relative standard error above threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: EstimatorKind,
    pub params: Option<EmaxParams>,
    pub covariance: Option<[[f64; 3]; 3]>,
    pub std_errors: Option<[f64; 3]>,
    pub status: FitStatus,
    pub status_reason: Option<StatusReason>,
    pub iterations: usize,
    /// Sup-norm of the estimator's own estimating equation at `params`.
    pub equation_norm: Option<f64>,
    /// The MLE the Cox-Snell correction was applied to.
    pub base_mle: Option<EmaxParams>,
}

impl FitResult {
    pub fn failed(kind: EstimatorKind, reason: StatusReason, iterations: usize) -> Self {
        Self {
            kind,
            params: None,
            covariance: None,
            std_errors: None,
            status: FitStatus::FailedToEstimate,
            status_reason: Some(reason),
            iterations,
            equation_norm: None,
            base_mle: None,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn has_estimate(&self) -> bool {
        self.params.is_some()
    }

    pub fn covariance_matrix(&self) -> Option<Mat3> {
        self.covariance.as_ref().map(linalg::from_rows)
    }
}

/// Stability bounds on ED50 for a dataset.
pub fn ed50_bounds(data: &ObservationSet, config: &SolverConfig) -> (f64, f64) {
    let lo = data.min_positive_dose().unwrap_or(0.0) * config.ed50_lower_mult;
    let hi = data.max_dose().unwrap_or(f64::INFINITY) * config.ed50_upper_mult;
    (lo, hi)
}

/// Assesses a point estimate with curvature `info` (observed information of the
/// estimator's objective) and fills covariance, standard errors and status.
pub(crate) fn classify(
    kind: EstimatorKind,
    params: EmaxParams,
    info: &Mat3,
    data: &ObservationSet,
    config: &SolverConfig,
    iterations: usize,
    equation_norm: f64,
) -> FitResult {
    if !params.is_finite() || !info.iter().all(|v| v.is_finite()) {
        return FitResult::failed(kind, StatusReason::NonFinite, iterations);
    }
    // The iteration stopped without solving the estimating equation.
    if !(equation_norm <= config.grad_tol) {
        return FitResult::failed(kind, StatusReason::NonConvergence, iterations);
    }
    let mut result = FitResult {
        kind,
        params: Some(params),
        covariance: None,
        std_errors: None,
        status: FitStatus::Converged,
        status_reason: None,
        iterations,
        equation_norm: Some(equation_norm),
        base_mle: None,
    };
    let Some(cov) = linalg::guarded_inverse(&info.symmetric_part(), SINGULAR_RCOND) else {
        result.status = FitStatus::FailedToEstimate;
        result.status_reason = Some(StatusReason::SingularInformation);
        return result;
    };
    let cov = cov.symmetric_part();
    result.covariance = Some(linalg::to_rows(&cov));
    let variances = [cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]];
    let se_defined = variances.iter().all(|v| v.is_finite() && *v > 0.0);
    if se_defined {
        result.std_errors = Some(variances.map(f64::sqrt));
    }
    result.status_reason = stability_reason(&params, result.std_errors.as_ref(), data, config);
    if result.status_reason.is_none() && !linalg::is_positive_definite(&cov) {
        result.status_reason = Some(StatusReason::UndefinedStdError);
    }
    if result.status_reason.is_some() {
        result.status = FitStatus::Unstable;
    }
    result
}

/// The instability rules: ED50 bound hit, undefined standard error, or a
/// relative standard error above the threshold.
pub fn stability_reason(
    params: &EmaxParams,
    std_errors: Option<&[f64; 3]>,
    data: &ObservationSet,
    config: &SolverConfig,
) -> Option<StatusReason> {
    let (lo, hi) = ed50_bounds(data, config);
    let ed50 = params.ed50();
    if ed50 > hi || ed50 < lo {
        return Some(StatusReason::Ed50BoundHit);
    }
    let Some(se) = std_errors else {
        return Some(StatusReason::UndefinedStdError);
    };
    if se.iter().any(|s| !s.is_finite()) {
        return Some(StatusReason::UndefinedStdError);
    }
    let est = params.to_array();
    if (0..3).any(|s| se[s] > config.rel_se_threshold * est[s].abs()) {
        return Some(StatusReason::RelativeSeExceeded);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_kind_round_trips_through_str() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.as_str().parse::<EstimatorKind>().unwrap(), k);
        }
        assert_eq!("Cox-Snell".parse::<EstimatorKind>().unwrap(), EstimatorKind::CoxSnell);
        assert!("ols".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        SolverConfig::default().validate().unwrap();
        let bad = SolverConfig { max_iter: 0, grad_tol: -1.0, ..Default::default() };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("max_iter") && msg.contains("grad_tol"));
    }
}
