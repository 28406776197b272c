//! Damped Newton ascent with step halving, shared by the likelihood-based fits.

use crate::linalg::{self, Mat3, Vec3};

use super::SolverConfig;

pub(crate) const MAX_HALVINGS: usize = 30;
/// Cap on the sup-norm of a single full step.
pub(crate) const MAX_STEP: f64 = 5.0;
/// Consecutive below-tolerance changes, with the gradient still above
/// tolerance, before the relative-change rule stops the ascent.
pub(crate) const MAX_STALLS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Gradient,
    RelativeChange,
    Exhausted,
    NonFinite,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub theta: Vec3,
    pub iterations: usize,
    pub stop: Stop,
}

pub(crate) trait Objective {
    fn value(&self, theta: &Vec3) -> f64;
    fn gradient(&self, theta: &Vec3) -> Vec3;
    /// Negative Hessian, or a local approximation to it.
    fn curvature(&self, theta: &Vec3) -> Mat3;
    /// Positive semidefinite metric used when the curvature is not positive definite.
    fn metric(&self, theta: &Vec3) -> Mat3;
}

fn solve_spd(m: &Mat3, rhs: &Vec3) -> Option<Vec3> {
    let chol = m.symmetric_part().cholesky()?;
    let x = chol.solve(rhs);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn direction<O: Objective>(obj: &O, theta: &Vec3, grad: &Vec3) -> Vec3 {
    if let Some(d) = solve_spd(&obj.curvature(theta), grad) {
        return d;
    }
    let metric = obj.metric(theta);
    let scale = metric.diagonal().max().max(1e-12);
    let mut ridge = 1e-10 * scale;
    for _ in 0..12 {
        if let Some(d) = solve_spd(&(metric + Mat3::identity() * ridge), grad) {
            return d;
        }
        ridge *= 100.0;
    }
    *grad
}

pub(crate) fn maximize<O: Objective>(obj: &O, start: Vec3, config: &SolverConfig) -> Outcome {
    let mut theta = start;
    let mut value = obj.value(&theta);
    if !value.is_finite() {
        return Outcome { theta, iterations: 0, stop: Stop::NonFinite };
    }
    let mut stalls = 0;
    for iter in 1..=config.max_iter {
        let grad = obj.gradient(&theta);
        if !grad.iter().all(|g| g.is_finite()) {
            return Outcome { theta, iterations: iter - 1, stop: Stop::NonFinite };
        }
        if linalg::max_abs(&grad) <= config.grad_tol {
            return Outcome { theta, iterations: iter - 1, stop: Stop::Gradient };
        }
        let mut dir = direction(obj, &theta, &grad);
        let len = linalg::max_abs(&dir);
        if len > MAX_STEP {
            dir *= MAX_STEP / len;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = theta + dir * step;
            let v = obj.value(&cand);
            if v.is_finite() && v >= value {
                accepted = Some((cand, v));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            // No ascent left at machine precision: the objective has stopped changing.
            return Outcome { theta, iterations: iter, stop: Stop::RelativeChange };
        };
        let d_theta = linalg::max_abs(&(next - theta)) / linalg::max_abs(&theta).max(1.0);
        let d_value = (next_value - value).abs() / (value.abs() + config.rel_change_tol);
        theta = next;
        value = next_value;
        if d_theta <= config.rel_change_tol || d_value <= config.rel_change_tol {
            stalls += 1;
            let g = obj.gradient(&theta);
            if stalls >= MAX_STALLS || linalg::max_abs(&g) <= config.grad_tol || !g.iter().all(|v| v.is_finite()) {
                return Outcome { theta, iterations: iter, stop: Stop::RelativeChange };
            }
        } else {
            stalls = 0;
        }
    }
    Outcome { theta, iterations: config.max_iter, stop: Stop::Exhausted }
}
