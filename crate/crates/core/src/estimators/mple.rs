//! Maximum penalized likelihood with the Jeffreys prior `|I(theta)|^{1/2}`.

use crate::cumulants::CumulantBundle;
use crate::error::{EmaxError, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::model::{deriv_tensors, expected_information, expected_information_from, log_likelihood, score_from, EmaxParams, ObservationSet};

use super::ascent::{self, Objective, Stop};
use super::firth::regular_start;
use super::{classify, EstimatorKind, FitResult, SolverConfig, StatusReason, SINGULAR_RCOND};

/// `log L + log det(I) / 2`; negative infinity where `I` is not positive definite.
pub fn penalized_loglik(params: &EmaxParams, data: &ObservationSet) -> f64 {
    let info = expected_information(params, data);
    match info.symmetric_part().cholesky() {
        Some(chol) => {
            let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            if log_det.is_finite() {
                log_likelihood(params, data) + 0.5 * log_det
            } else {
                f64::NEG_INFINITY
            }
        }
        None => f64::NEG_INFINITY,
    }
}

/// Exact gradient of [`penalized_loglik`]: `U_s + tr(I^{-1} dI/dtheta_s) / 2`.
pub fn penalized_score(params: &EmaxParams, data: &ObservationSet) -> Result<Vec3> {
    let d = deriv_tensors(params, data);
    let info = expected_information_from(&d);
    let inv = linalg::guarded_inverse(&info, SINGULAR_RCOND).ok_or(EmaxError::SingularInformation)?;
    let bundle = CumulantBundle::from_derivs(&d);
    debug_assert!(crate::cumulants::info_identity_residual(&bundle) < 1e-8);
    Ok(score_from(&d) + linalg::trace_contract(&inv, &bundle.di) * 0.5)
}

/// `O* = -d U* / d theta` by central differences of the analytic penalized score.
pub fn penalized_observed_information(params: &EmaxParams, data: &ObservationSet) -> Result<Mat3> {
    let theta = params.to_vec3();
    let mut jac = Mat3::zeros();
    for c in 0..3 {
        let h = 1e-5 * theta[c].abs().max(1.0);
        let mut up = theta;
        up[c] += h;
        let mut dn = theta;
        dn[c] -= h;
        let fu = penalized_score(&EmaxParams::from_vec3(&up), data)?;
        let fd = penalized_score(&EmaxParams::from_vec3(&dn), data)?;
        jac.set_column(c, &((fu - fd) / (2.0 * h)));
    }
    Ok(-jac.symmetric_part())
}

struct Penalized<'a> {
    data: &'a ObservationSet,
}

impl Objective for Penalized<'_> {
    fn value(&self, theta: &Vec3) -> f64 {
        penalized_loglik(&EmaxParams::from_vec3(theta), self.data)
    }

    fn gradient(&self, theta: &Vec3) -> Vec3 {
        penalized_score(&EmaxParams::from_vec3(theta), self.data).unwrap_or_else(|_| Vec3::repeat(f64::NAN))
    }

    fn curvature(&self, theta: &Vec3) -> Mat3 {
        penalized_observed_information(&EmaxParams::from_vec3(theta), self.data).unwrap_or_else(|_| Mat3::repeat(f64::NAN))
    }

    fn metric(&self, theta: &Vec3) -> Mat3 {
        expected_information(&EmaxParams::from_vec3(theta), self.data)
    }
}

pub fn fit_mple(data: &ObservationSet, config: &SolverConfig) -> FitResult {
    let kind = EstimatorKind::Mple;
    let data = data.to_aggregated();
    if data.check_fittable().is_err() {
        return FitResult::failed(kind, StatusReason::InvalidData, 0);
    }
    let Some(start) = regular_start(&data) else {
        return FitResult::failed(kind, StatusReason::SingularInformation, 0);
    };
    let out = ascent::maximize(&Penalized { data: &data }, start.to_vec3(), config);
    match out.stop {
        Stop::Exhausted => FitResult::failed(kind, StatusReason::NonConvergence, out.iterations),
        Stop::NonFinite => FitResult::failed(kind, StatusReason::NonFinite, out.iterations),
        Stop::Gradient | Stop::RelativeChange => {
            let params = EmaxParams::from_vec3(&out.theta);
            let eq = penalized_score(&params, &data).map(|g| linalg::max_abs(&g)).unwrap_or(f64::NAN);
            match penalized_observed_information(&params, &data) {
                Ok(info) => classify(kind, params, &info, &data, config, out.iterations, eq),
                Err(_) => {
                    let mut r = FitResult::failed(kind, StatusReason::SingularInformation, out.iterations);
                    r.params = Some(params);
                    r
                }
            }
        }
    }
}
