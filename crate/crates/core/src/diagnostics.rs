//! Separation, sample-shape and stability diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{EmaxError, Result};
use crate::estimators::{stability_reason, FitResult, FitStatus, SolverConfig};
use crate::model::{DoseGroup, ObservationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Separation {
    None,
    Quasi,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    ConcaveIncreasing,
    ConvexIncreasing,
    NonMonotone,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub dose: f64,
    pub n: u32,
    pub events: u32,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub separation: Separation,
    /// `None` when fewer than three arms are present.
    pub shape: Option<Shape>,
    pub per_arm: Vec<ArmSummary>,
    pub flags: Vec<String>,
    /// Re-evaluated fit status; absent for data-only reports.
    pub stability: Option<FitStatus>,
}

fn pure_zero(a: &DoseGroup) -> bool {
    a.events == 0
}

fn pure_one(a: &DoseGroup) -> bool {
    a.events == a.n
}

/// Threshold scan over dose-ordered arms.
///
/// `Complete`: some cut puts only non-events on one side and only events on
/// the other (either direction), or the outcome is constant. `Quasi`: an
/// outermost arm is pure, so a cut predicts one side perfectly while the
/// remaining arms are tied.
pub fn detect_separation(data: &ObservationSet) -> Separation {
    let arms: Vec<DoseGroup> = data.arms().into_iter().filter(|a| a.n > 0).collect();
    if arms.is_empty() {
        return Separation::None;
    }
    if arms.iter().all(pure_zero) || arms.iter().all(pure_one) {
        return Separation::Complete;
    }
    for k in 1..arms.len() {
        let (lo, hi) = arms.split_at(k);
        let up = lo.iter().all(pure_zero) && hi.iter().all(pure_one);
        let down = lo.iter().all(pure_one) && hi.iter().all(pure_zero);
        if up || down {
            return Separation::Complete;
        }
    }
    let first = &arms[0];
    let last = &arms[arms.len() - 1];
    if pure_zero(first) || pure_one(first) || pure_zero(last) || pure_one(last) {
        return Separation::Quasi;
    }
    Separation::None
}

/// Arm-level shape of the observed proportions.
///
/// Three arms use the secant rule `m1 = (p2 - p1)/(D2 - D1)`, `m2 = (p3 - p1)/(D3 - D1)`:
/// `m1 < m2` is convex increasing, `p1 < p2 < p3` with `m1 > m2` is concave
/// increasing, anything else is reported as non-monotone (the increasing-concave
/// condition fails). With more arms, secant slopes anchored at the lowest dose
/// must strictly decrease for a concave label.
pub fn classify_shape(data: &ObservationSet) -> Result<Shape> {
    let arms: Vec<DoseGroup> = data.arms().into_iter().filter(|a| a.n > 0).collect();
    if arms.len() < 3 {
        return Err(EmaxError::InsufficientArms(arms.len()));
    }
    let p: Vec<f64> = arms.iter().map(|a| a.proportion()).collect();
    let d: Vec<f64> = arms.iter().map(|a| a.dose).collect();
    let slope = |k: usize| (p[k] - p[0]) / (d[k] - d[0]);

    if arms.len() == 3 {
        let (m1, m2) = (slope(1), slope(2));
        return Ok(if m1 < m2 {
            Shape::ConvexIncreasing
        } else if p[0] < p[1] && p[1] < p[2] && m1 > m2 {
            Shape::ConcaveIncreasing
        } else {
            Shape::NonMonotone
        });
    }

    let total: f64 = arms.iter().map(|a| a.n as f64).sum();
    let (min, max) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if max - min < 1.0 / total.sqrt() {
        return Ok(Shape::Flat);
    }
    if p.windows(2).any(|w| w[1] < w[0]) {
        return Ok(Shape::NonMonotone);
    }
    let slopes: Vec<f64> = (1..arms.len()).map(slope).collect();
    if slopes.windows(2).all(|w| w[1] < w[0]) {
        Ok(Shape::ConcaveIncreasing)
    } else {
        Ok(Shape::ConvexIncreasing)
    }
}

fn per_arm(data: &ObservationSet) -> Vec<ArmSummary> {
    data.arms()
        .iter()
        .map(|a| ArmSummary { dose: a.dose, n: a.n, events: a.events, proportion: a.proportion() })
        .collect()
}

/// Separation, shape and per-arm table without a fit.
pub fn diagnose(data: &ObservationSet) -> DiagnosticReport {
    let separation = detect_separation(data);
    let mut flags = Vec::new();
    match separation {
        Separation::Complete => flags.push("complete separation: the MLE does not exist".to_string()),
        Separation::Quasi => flags.push("quasi-complete separation: an outermost arm is perfectly predicted".to_string()),
        Separation::None => {}
    }
    let shape = match classify_shape(data) {
        Ok(s) => {
            match s {
                Shape::NonMonotone => flags.push("increasing-concave condition fails (non-monotone or not concave)".into()),
                Shape::ConvexIncreasing => flags.push("convex increasing sample shape".into()),
                Shape::Flat => flags.push("flat sample response".into()),
                Shape::ConcaveIncreasing => {}
            }
            Some(s)
        }
        Err(e) => {
            flags.push(e.to_string());
            None
        }
    };
    DiagnosticReport { separation, shape, per_arm: per_arm(data), flags, stability: None }
}

/// Re-applies the instability rules to a fit and attaches data diagnostics.
pub fn stability_report(fit: &FitResult, data: &ObservationSet, config: &SolverConfig) -> DiagnosticReport {
    let mut report = diagnose(data);
    let status = match (fit.status, fit.params) {
        (FitStatus::FailedToEstimate, _) | (_, None) => {
            let why = fit.status_reason.map_or("no estimate", |r| r.describe());
            report.flags.push(format!("{}: failed to estimate ({why})", fit.kind.label()));
            FitStatus::FailedToEstimate
        }
        (own, Some(params)) => match stability_reason(&params, fit.std_errors.as_ref(), data, config) {
            Some(reason) => {
                report.flags.push(format!("{}: {}", fit.kind.label(), reason.describe()));
                FitStatus::Unstable
            }
            None if own == FitStatus::Unstable => {
                let why = fit.status_reason.map_or("unstable", |r| r.describe());
                report.flags.push(format!("{}: {why}", fit.kind.label()));
                FitStatus::Unstable
            }
            None => FitStatus::Converged,
        },
    };
    report.stability = Some(status);
    report
}
