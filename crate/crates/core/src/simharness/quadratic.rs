//! Quadratic-logit sensitivity model `eta(d) = b0 + b1 d + b2 d^2`.

use serde::{Deserialize, Serialize};

use crate::estimators::ascent::{self, Objective, Stop};
use crate::estimators::{FitStatus, SolverConfig, StatusReason, SINGULAR_RCOND};
use crate::linalg::{self, Mat3, Vec3};
use crate::model::{expit, softplus, DoseGroup, ObservationSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub beta: Option<[f64; 3]>,
    pub covariance: Option<[[f64; 3]; 3]>,
    pub std_errors: Option<[f64; 3]>,
    pub status: FitStatus,
    pub status_reason: Option<StatusReason>,
    pub iterations: usize,
    /// Vertex `-b1 / (2 b2)`, reported when `b2` is negative with a 95% Wald
    /// interval that excludes zero.
    pub peak: Option<f64>,
}

impl QuadraticFit {
    fn failed(reason: StatusReason, iterations: usize) -> Self {
        Self {
            beta: None,
            covariance: None,
            std_errors: None,
            status: FitStatus::FailedToEstimate,
            status_reason: Some(reason),
            iterations,
            peak: None,
        }
    }

    pub fn predict_prob(&self, dose: f64) -> Option<f64> {
        self.beta.map(|b| expit(b[0] + b[1] * dose + b[2] * dose * dose))
    }
}

/// Vertex of a concave quadratic; `None` unless `b2 < 0`.
pub fn quadratic_peak(beta: &[f64; 3]) -> Option<f64> {
    (beta[2] < 0.0).then(|| -beta[1] / (2.0 * beta[2]))
}

/// Log-likelihood in scaled dose `x = d / scale`.
struct Quadratic<'a> {
    arms: &'a [DoseGroup],
    scale: f64,
}

impl Quadratic<'_> {
    fn design(&self, dose: f64) -> Vec3 {
        let x = dose / self.scale;
        Vec3::new(1.0, x, x * x)
    }
}

impl Objective for Quadratic<'_> {
    fn value(&self, a: &Vec3) -> f64 {
        self.arms
            .iter()
            .map(|g| {
                let eta = a.dot(&self.design(g.dose));
                -(g.events as f64) * softplus(-eta) - ((g.n - g.events) as f64) * softplus(eta)
            })
            .sum()
    }

    fn gradient(&self, a: &Vec3) -> Vec3 {
        self.arms.iter().fold(Vec3::zeros(), |acc, g| {
            let x = self.design(g.dose);
            acc + x * (g.events as f64 - g.n as f64 * expit(a.dot(&x)))
        })
    }

    fn curvature(&self, a: &Vec3) -> Mat3 {
        self.arms.iter().fold(Mat3::zeros(), |acc, g| {
            let x = self.design(g.dose);
            let p = expit(a.dot(&x));
            acc + x * x.transpose() * (g.n as f64 * p * (1.0 - p))
        })
    }

    fn metric(&self, a: &Vec3) -> Mat3 {
        self.curvature(a)
    }
}

/// Ordinary logistic ML fit on `(1, d, d^2)`.
pub fn fit_quadratic_logit(data: &ObservationSet, config: &SolverConfig) -> QuadraticFit {
    let arms = data.arms();
    if arms.len() < 3 {
        return QuadraticFit::failed(StatusReason::InvalidData, 0);
    }
    let scale = data.max_dose().filter(|d| *d > 0.0).unwrap_or(1.0);
    let obj = Quadratic { arms: &arms, scale };
    let total: f64 = arms.iter().map(|a| a.n as f64).sum();
    let events: f64 = arms.iter().map(|a| a.events as f64).sum();
    let start = Vec3::new(crate::model::logit((events + 0.5) / (total + 1.0)), 0.0, 0.0);
    let out = ascent::maximize(&obj, start, config);
    match out.stop {
        Stop::Exhausted => return QuadraticFit::failed(StatusReason::NonConvergence, out.iterations),
        Stop::NonFinite => return QuadraticFit::failed(StatusReason::NonFinite, out.iterations),
        Stop::Gradient | Stop::RelativeChange => {}
    }
    let Some(cov_scaled) = linalg::guarded_inverse(&obj.curvature(&out.theta), SINGULAR_RCOND) else {
        return QuadraticFit::failed(StatusReason::SingularInformation, out.iterations);
    };
    // Back to the original dose scale.
    let t = Mat3::from_diagonal(&Vec3::new(1.0, 1.0 / scale, 1.0 / (scale * scale)));
    let beta = t * out.theta;
    let cov = t * cov_scaled.symmetric_part() * t;
    let se = [cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]].map(|v| v.max(0.0).sqrt());
    let beta = [beta[0], beta[1], beta[2]];
    let curved = beta[2] + 1.959964 * se[2] < 0.0;
    QuadraticFit {
        beta: Some(beta),
        covariance: Some(linalg::to_rows(&cov)),
        std_errors: Some(se),
        status: FitStatus::Converged,
        status_reason: None,
        iterations: out.iterations,
        peak: if curved { quadratic_peak(&beta) } else { None },
    }
}
