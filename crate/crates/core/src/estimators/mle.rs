use crate::linalg::{self, Mat3, Vec3};
use crate::model::{deriv_tensors, expected_information, hessian_from, log_likelihood, logit, DoseGroup, score_from, EmaxParams, ObservationSet};

use super::ascent::{self, Objective, Stop};
use super::{classify, starting_values, EstimatorKind, FitResult, SolverConfig, StatusReason};

/// Relative margin by which an interior maximum must beat the boundary supremum.
const BOUNDARY_MARGIN: f64 = 1e-10;

pub(crate) struct LogLik<'a> {
    pub data: &'a ObservationSet,
}

impl Objective for LogLik<'_> {
    fn value(&self, theta: &Vec3) -> f64 {
        log_likelihood(&EmaxParams::from_vec3(theta), self.data)
    }

    fn gradient(&self, theta: &Vec3) -> Vec3 {
        score_from(&deriv_tensors(&EmaxParams::from_vec3(theta), self.data))
    }

    fn curvature(&self, theta: &Vec3) -> Mat3 {
        -hessian_from(&deriv_tensors(&EmaxParams::from_vec3(theta), self.data))
    }

    fn metric(&self, theta: &Vec3) -> Mat3 {
        expected_information(&EmaxParams::from_vec3(theta), self.data)
    }
}

/// Runs the ascent and maps terminal failures; `Ok` carries the final iterate.
pub(crate) fn solve_mle(data: &ObservationSet, config: &SolverConfig) -> Result<(EmaxParams, usize), (StatusReason, usize)> {
    if data.check_fittable().is_err() {
        return Err((StatusReason::InvalidData, 0));
    }
    let Ok(start) = starting_values(data) else {
        return Err((StatusReason::InvalidData, 0));
    };
    let out = ascent::maximize(&LogLik { data }, start.params.to_vec3(), config);
    match out.stop {
        Stop::Exhausted => Err((StatusReason::NonConvergence, out.iterations)),
        Stop::NonFinite => Err((StatusReason::NonFinite, out.iterations)),
        Stop::Gradient | Stop::RelativeChange => {
            let params = EmaxParams::from_vec3(&out.theta);
            let ll = log_likelihood(&params, data);
            if ll <= boundary_loglik(data) + BOUNDARY_MARGIN * (1.0 + ll.abs()) {
                return Err((StatusReason::NoInteriorMaximum, out.iterations));
            }
            Ok((params, out.iterations))
        }
    }
}

pub fn fit_mle(data: &ObservationSet, config: &SolverConfig) -> FitResult {
    let data = data.to_aggregated();
    match solve_mle(&data, config) {
        Err((reason, iters)) => FitResult::failed(EstimatorKind::Mle, reason, iters),
        Ok((params, iters)) => {
            let d = deriv_tensors(&params, &data);
            let eq = linalg::max_abs(&score_from(&d));
            classify(EstimatorKind::Mle, params, &-hessian_from(&d), &data, config, iters, eq)
        }
    }
}

fn binomial_loglik(events: f64, n: f64) -> f64 {
    if events <= 0.0 || events >= n {
        0.0
    } else {
        let p = events / n;
        events * p.ln() + (n - events) * (1.0 - p).ln()
    }
}

/// Supremum of the log-likelihood over the limits of the parameter space:
/// ED50 -> 0 with finite Emax (placebo rate and one pooled active rate),
/// ED50 -> infinity (logistic in dose), and ED50 -> 0 with Emax unbounded
/// (logistic in 1/dose on active arms, placebo driven to a pure rate).
pub fn boundary_loglik(data: &ObservationSet) -> f64 {
    use super::start::{logistic2, Arm};
    let arms = data.arms();
    let (zero, active): (Vec<&DoseGroup>, Vec<&DoseGroup>) = arms.iter().partition(|a| a.dose == 0.0);
    let placebo = zero.first().copied();
    let (pe, pn) = placebo.map_or((0.0, 0.0), |a| (a.events as f64, a.n as f64));
    let ae: f64 = active.iter().map(|a| a.events as f64).sum();
    let an: f64 = active.iter().map(|a| a.n as f64).sum();
    let mut best = binomial_loglik(pe, pn) + binomial_loglik(ae, an);

    let dmax = data.max_dose().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let a0 = logit((ae + pe + 0.5) / (an + pn + 1.0));
    let linear: Vec<Arm> =
        arms.iter().map(|a| Arm { x: a.dose / dmax, n: a.n as f64, events: a.events as f64 }).collect();
    best = best.max(logistic2(&linear, a0).2);

    if let Some(dmin) = data.min_positive_dose() {
        let recip: Vec<Arm> =
            active.iter().map(|a| Arm { x: dmin / a.dose, n: a.n as f64, events: a.events as f64 }).collect();
        let (_, slope, ll) = logistic2(&recip, a0);
        // eta = A - B/d with B = Emax * ED50; the placebo limit is pure in the direction of -B.
        let feasible = match placebo {
            None => true,
            Some(p) if p.events == 0 => slope <= 0.0,
            Some(p) if p.events == p.n => slope >= 0.0,
            Some(_) => false,
        };
        if feasible {
            best = best.max(ll);
        }
    }
    best
}
