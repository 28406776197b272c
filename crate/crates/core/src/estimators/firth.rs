//! Firth's modified score. For this nonlinear model the modified score is not
//! the gradient of any objective, so the root is found with a Broyden
//! iteration rather than an ascent method.

use nalgebra::LU;

use crate::cumulants::CumulantBundle;
use crate::error::{EmaxError, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::model::{deriv_tensors, expected_information_from, hessian_from, score_from, EmaxParams, ObservationSet};

use super::mle::fit_mle;
use super::mple::fit_mple;
use super::{classify, starting_values, EstimatorKind, FitResult, FitStatus, SolverConfig, StatusReason, SINGULAR_RCOND};

/// Trust-region radius on the sup-norm of each step.
const MAX_STEP: f64 = 2.0;
const MAX_BACKTRACK: usize = 12;
/// Iteration budget for each fallback grid start.
const GRID_ITER: usize = 200;

fn grid_seeds(e0: f64) -> impl Iterator<Item = EmaxParams> {
    [2.0, 3.0, 4.0, 5.0, 1.0, 0.0, 6.0].into_iter().flat_map(move |log_ed50| {
        [1.0, 3.0, 0.5, 6.0, -1.0].into_iter().map(move |emax| EmaxParams { e0, emax, log_ed50 })
    })
}

/// `W_s = tr(I^{-1} (P_s + k2_1[.][.][s])) / 2`.
pub fn firth_adjustment(bundle: &CumulantBundle, info_inv: &Mat3) -> Vec3 {
    let mut sum = bundle.p;
    linalg::add_scaled(&mut sum, &bundle.k2_1, 1.0);
    linalg::trace_contract(info_inv, &sum) * 0.5
}

pub fn firth_modified_score(params: &EmaxParams, data: &ObservationSet) -> Result<Vec3> {
    let d = deriv_tensors(params, data);
    let info = expected_information_from(&d);
    let inv = linalg::guarded_inverse(&info, SINGULAR_RCOND).ok_or(EmaxError::SingularInformation)?;
    let bundle = CumulantBundle::from_derivs(&d);
    Ok(score_from(&d) + firth_adjustment(&bundle, &inv))
}

fn eval(theta: &Vec3, data: &ObservationSet) -> Option<Vec3> {
    let v = firth_modified_score(&EmaxParams::from_vec3(theta), data).ok()?;
    v.iter().all(|x| x.is_finite()).then_some(v)
}

fn fd_jacobian(theta: &Vec3, f0: &Vec3, data: &ObservationSet) -> Option<Mat3> {
    let mut j = Mat3::zeros();
    for c in 0..3 {
        let h = 1e-6 * theta[c].abs().max(1.0);
        let mut up = *theta;
        up[c] += h;
        let mut dn = *theta;
        dn[c] -= h;
        let col = match (eval(&up, data), eval(&dn, data)) {
            (Some(a), Some(b)) => (a - b) / (2.0 * h),
            (Some(a), None) => (a - f0) / h,
            (None, Some(b)) => (f0 - b) / h,
            (None, None) => return None,
        };
        j.set_column(c, &col);
    }
    Some(j)
}

fn newton_step(jac: &Mat3, f: &Vec3) -> Option<Vec3> {
    let step = LU::new(*jac).solve(&-f)?;
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Scoring step `I^{-1} F`: the modified score's Jacobian is close to `-I`.
fn scoring_step(theta: &Vec3, f: &Vec3, data: &ObservationSet) -> Option<Vec3> {
    let info = expected_information_from(&deriv_tensors(&EmaxParams::from_vec3(theta), data));
    let step = info.symmetric_part().cholesky()?.solve(f);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

fn clamp(mut step: Vec3) -> Vec3 {
    let len = linalg::max_abs(&step);
    if len > MAX_STEP {
        step *= MAX_STEP / len;
    }
    step
}

/// Backtracks along `step` until the residual norm decreases.
fn try_step(theta: &Vec3, f: &Vec3, step: &Vec3, data: &ObservationSet) -> Option<(Vec3, Vec3)> {
    let norm = f.norm();
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let cand = theta + step * t;
        if let Some(fc) = eval(&cand, data) {
            if fc.norm() < norm {
                return Some((cand, fc));
            }
        }
        t *= 0.5;
    }
    None
}

/// A start at which the information is invertible; degenerate starts have `Emax = 0`.
pub(crate) fn regular_start(data: &ObservationSet) -> Option<EmaxParams> {
    let start = starting_values(data).ok()?.params;
    [start.emax, 0.5, -0.5, 1.0, -1.0].into_iter().find_map(|emax| {
        let p = EmaxParams { emax, ..start };
        let info = expected_information_from(&deriv_tensors(&p, data));
        linalg::guarded_inverse(&info, SINGULAR_RCOND).map(|_| p)
    })
}

/// Levenberg-Marquardt step on `|F|^2` with a fresh Jacobian.
fn damped_step(jac: &Mat3, f: &Vec3, lambda: f64) -> Option<Vec3> {
    let jt = jac.transpose();
    let a = jt * jac;
    let scale = a.diagonal().max().max(1e-12);
    let step = (a + Mat3::identity() * (lambda * scale)).cholesky()?.solve(&(-(jt * f)));
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Broyden iteration from `theta`; `Ok` carries the root and iteration count.
fn solve(mut theta: Vec3, data: &ObservationSet, config: &SolverConfig) -> std::result::Result<(Vec3, usize), (StatusReason, usize)> {
    let Some(mut f) = eval(&theta, data) else {
        return Err((StatusReason::SingularInformation, 0));
    };
    let mut jac = fd_jacobian(&theta, &f, data);
    let mut fresh = true;
    for iter in 1..=config.max_iter {
        if linalg::max_abs(&f) <= config.grad_tol {
            return Ok((theta, iter - 1));
        }
        let mut moved = jac.as_ref().and_then(|j| newton_step(j, &f)).and_then(|s| try_step(&theta, &f, &clamp(s), data));
        if moved.is_none() && !fresh {
            // Stagnation: refresh the Jacobian by finite differences.
            jac = fd_jacobian(&theta, &f, data);
            moved = jac.as_ref().and_then(|j| newton_step(j, &f)).and_then(|s| try_step(&theta, &f, &clamp(s), data));
        }
        if moved.is_none() {
            moved = scoring_step(&theta, &f, data).and_then(|s| try_step(&theta, &f, &clamp(s), data));
        }
        if moved.is_none() {
            if let Some(j) = jac.as_ref() {
                moved = [1e-4, 1e-2, 1.0, 1e2]
                    .into_iter()
                    .find_map(|lambda| damped_step(j, &f, lambda).and_then(|s| try_step(&theta, &f, &clamp(s), data)));
            }
        }
        let Some((next, f_next)) = moved else {
            return Err((StatusReason::NonConvergence, iter));
        };
        let s = next - theta;
        let y = f_next - f;
        let ss = s.dot(&s);
        if let Some(j) = jac.as_mut() {
            if ss > 0.0 {
                *j += (y - *j * s) * s.transpose() / ss;
            }
        }
        fresh = false;
        theta = next;
        f = f_next;
    }
    if linalg::max_abs(&f) <= config.grad_tol {
        return Ok((theta, config.max_iter));
    }
    Err((StatusReason::NonConvergence, config.max_iter))
}

pub fn fit_firth(data: &ObservationSet, config: &SolverConfig) -> FitResult {
    let kind = EstimatorKind::Firth;
    let data = data.to_aggregated();
    if data.check_fittable().is_err() {
        return FitResult::failed(kind, StatusReason::InvalidData, 0);
    }
    // The modified score can have several roots; the one reached from the MLE
    // is preferred, then the grid start, then the penalized-likelihood estimate.
    let mle = fit_mle(&data, config);
    let mut seeds: Vec<EmaxParams> = Vec::new();
    if mle.status != FitStatus::FailedToEstimate {
        seeds.extend(mle.params);
    }
    seeds.extend(regular_start(&data));
    let mut last = StatusReason::SingularInformation;
    let mut spent = 0;
    let mut attempt = |seed: EmaxParams, spent: &mut usize| match solve(seed.to_vec3(), &data, config) {
        Ok((theta, iters)) => {
            let params = EmaxParams::from_vec3(&theta);
            let eq = eval(&theta, &data).map_or(f64::NAN, |f| linalg::max_abs(&f));
            let h = hessian_from(&deriv_tensors(&params, &data));
            Some(classify(kind, params, &-h, &data, config, *spent + iters, eq))
        }
        Err((reason, iters)) => {
            *spent += iters;
            last = reason;
            None
        }
    };
    for seed in seeds {
        if let Some(fit) = attempt(seed, &mut spent) {
            return fit;
        }
    }
    if let Some(seed) = fit_mple(&data, config).params {
        if let Some(fit) = attempt(seed, &mut spent) {
            return fit;
        }
    }
    // Last resort: a fixed grid of starts with a short budget each.
    let short = SolverConfig { max_iter: config.max_iter.min(GRID_ITER), ..*config };
    let base = starting_values(&data).map(|s| s.params.e0).unwrap_or(0.0);
    for seed in grid_seeds(base) {
        match solve(seed.to_vec3(), &data, &short) {
            Ok((theta, iters)) => {
                let params = EmaxParams::from_vec3(&theta);
                let eq = eval(&theta, &data).map_or(f64::NAN, |f| linalg::max_abs(&f));
                let h = hessian_from(&deriv_tensors(&params, &data));
                return classify(kind, params, &-h, &data, config, spent + iters, eq);
            }
            Err((_, iters)) => spent += iters,
        }
    }
    FitResult::failed(kind, last, spent)
}
