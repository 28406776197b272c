//! Post-hoc first-order bias correction of the MLE.

use crate::cumulants::CumulantBundle;
use crate::error::{EmaxError, Result};
use crate::linalg::{self, Vec3};
use crate::model::{deriv_tensors, expected_information_from, hessian_from, EmaxParams, ObservationSet};

use super::mle::fit_mle;
use super::{EstimatorKind, FitResult, FitStatus, SolverConfig, StatusReason, SINGULAR_RCOND};

/// `B_s = sum_{r,j,l} k^{sr} k^{jl} (k3_rjl / 2 + k21_rjl)` for any parameter dimension,
/// where `k^{..}` is the inverse of the negative expected information.
pub fn cox_snell_contract<const P: usize>(
    neg_info_inv: &[[f64; P]; P],
    k3: &[[[f64; P]; P]; P],
    k2_1: &[[[f64; P]; P]; P],
) -> [f64; P] {
    let mut out = [0.0; P];
    for (s, b) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for r in 0..P {
            for j in 0..P {
                for l in 0..P {
                    acc += neg_info_inv[s][r] * neg_info_inv[j][l] * (0.5 * k3[r][j][l] + k2_1[r][j][l]);
                }
            }
        }
        *b = acc;
    }
    out
}

/// First-order bias of the MLE evaluated at `params`.
pub fn cox_snell_bias(params: &EmaxParams, data: &ObservationSet) -> Result<Vec3> {
    let d = deriv_tensors(params, data);
    let info = expected_information_from(&d);
    let inv = linalg::guarded_inverse(&(-info), SINGULAR_RCOND).ok_or(EmaxError::SingularInformation)?;
    let bundle = CumulantBundle::from_derivs(&d);
    let b = cox_snell_contract(&linalg::to_rows(&inv), &bundle.k3, &bundle.k2_1);
    Ok(Vec3::new(b[0], b[1], b[2]))
}

/// Runs the MLE and subtracts the bias evaluated there. The status is the
/// MLE's: the correction is only as stable as the information it inverts.
/// Covariance and standard errors come from `-H` at the corrected point and are
/// left empty where that matrix is not positive definite.
pub fn fit_cox_snell(data: &ObservationSet, config: &SolverConfig) -> FitResult {
    let kind = EstimatorKind::CoxSnell;
    let data = data.to_aggregated();
    let mle_fit = fit_mle(&data, config);
    let Some(mle) = mle_fit.params.filter(|_| mle_fit.status != FitStatus::FailedToEstimate) else {
        let reason = mle_fit.status_reason.unwrap_or(StatusReason::NonConvergence);
        return FitResult::failed(kind, reason, mle_fit.iterations);
    };
    let iters = mle_fit.iterations;
    let corrected = cox_snell_bias(&mle, &data).map(|b| EmaxParams::from_vec3(&(mle.to_vec3() - b)));
    let corrected = match corrected {
        Ok(c) if c.is_finite() => c,
        Ok(_) => return FitResult { base_mle: Some(mle), ..FitResult::failed(kind, StatusReason::NonFinite, iters) },
        Err(_) => {
            return FitResult { base_mle: Some(mle), ..FitResult::failed(kind, StatusReason::SingularInformation, iters) }
        }
    };
    let neg_h = -hessian_from(&deriv_tensors(&corrected, &data));
    let cov = linalg::guarded_inverse(&neg_h.symmetric_part(), SINGULAR_RCOND)
        .map(|c| c.symmetric_part())
        .filter(linalg::is_positive_definite);
    FitResult {
        kind,
        params: Some(corrected),
        covariance: cov.as_ref().map(linalg::to_rows),
        std_errors: cov.map(|c| [c[(0, 0)].sqrt(), c[(1, 1)].sqrt(), c[(2, 2)].sqrt()]),
        status: mle_fit.status,
        status_reason: mle_fit.status_reason,
        iterations: iters,
        equation_norm: None,
        base_mle: Some(mle),
    }
}
