//! Binary Emax model on the logit scale, parameterized by `(E0, Emax, log ED50)`.
//!
//! The linear predictor is `eta(d) = E0 + Emax * d / (ED50 + d)`. Every
//! likelihood quantity in the crate is assembled from the per-observation
//! derivative tensors of `eta` computed here.

use serde::{Deserialize, Serialize};

use crate::error::{EmaxError, Result};
use crate::linalg::{Mat3, Tensor3, Vec3};

pub const E0: usize = 0;
pub const EMAX: usize = 1;
pub const LOG_ED50: usize = 2;
pub const PARAM_NAMES: [&str; 3] = ["e0", "emax", "log_ed50"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaxParams {
    pub e0: f64,
    pub emax: f64,
    pub log_ed50: f64,
}

impl EmaxParams {
    pub fn new(e0: f64, emax: f64, log_ed50: f64) -> Result<Self> {
        let p = Self { e0, emax, log_ed50 };
        if p.is_finite() {
            Ok(p)
        } else {
            Err(EmaxError::NonFiniteParams { e0, emax, log_ed50 })
        }
    }

    /// Builds from ED50 on the natural scale.
    pub fn from_ed50(e0: f64, emax: f64, ed50: f64) -> Result<Self> {
        if !(ed50 > 0.0) {
            return Err(EmaxError::InvalidData(format!("ED50 must be positive, got {ed50}")));
        }
        Self::new(e0, emax, ed50.ln())
    }

    pub fn ed50(&self) -> f64 {
        self.log_ed50.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.e0.is_finite() && self.emax.is_finite() && self.log_ed50.is_finite()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.e0, self.emax, self.log_ed50]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { e0: a[0], emax: a[1], log_ed50: a[2] }
    }

    pub fn to_vec3(&self) -> Vec3 {
        Vec3::new(self.e0, self.emax, self.log_ed50)
    }

    pub fn from_vec3(v: &Vec3) -> Self {
        Self { e0: v[0], emax: v[1], log_ed50: v[2] }
    }
}

/// Logistic function, branch-stable for large `|x|`.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Fraction of maximal effect at `dose`, `d / (ED50 + d)`, and its complement.
///
/// Written as `expit(ln d - log_ed50)` so neither extreme ED50 nor large doses overflow.
fn occupancy(log_ed50: f64, dose: f64) -> (f64, f64) {
    if dose <= 0.0 {
        return (0.0, 1.0);
    }
    let z = dose.ln() - log_ed50;
    (expit(z), expit(-z))
}

pub fn eta(params: &EmaxParams, dose: f64) -> f64 {
    let (f, _) = occupancy(params.log_ed50, dose);
    params.e0 + params.emax * f
}

pub fn predict_prob(params: &EmaxParams, dose: f64) -> f64 {
    expit(eta(params, dose))
}

/// One dose group: `events` responders out of `n` subjects at `dose`.
/// Subject-level records are groups with `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseGroup {
    pub dose: f64,
    pub n: u32,
    pub events: u32,
}

impl DoseGroup {
    pub fn proportion(&self) -> f64 {
        self.events as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Subject,
    Aggregated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    units: Vec<DoseGroup>,
    layout: Layout,
    levels: Vec<f64>,
}

impl ObservationSet {
    pub fn from_subjects(records: &[(f64, bool)]) -> Result<Self> {
        let units = records
            .iter()
            .map(|&(dose, y)| DoseGroup { dose, n: 1, events: y as u32 })
            .collect();
        Self::build(units, Layout::Subject)
    }

    pub fn from_groups(groups: Vec<DoseGroup>) -> Result<Self> {
        Self::build(groups, Layout::Aggregated)
    }

    fn build(units: Vec<DoseGroup>, layout: Layout) -> Result<Self> {
        for (i, u) in units.iter().enumerate() {
            if !u.dose.is_finite() || u.dose < 0.0 {
                return Err(EmaxError::InvalidData(format!("record {}: dose must be finite and >= 0, got {}", i + 1, u.dose)));
            }
            if u.n == 0 {
                return Err(EmaxError::InvalidData(format!("record {}: group size must be positive", i + 1)));
            }
            if u.events > u.n {
                return Err(EmaxError::InvalidData(format!(
                    "record {}: events ({}) exceed group size ({})",
                    i + 1,
                    u.events,
                    u.n
                )));
            }
        }
        let mut levels: Vec<f64> = units.iter().map(|u| u.dose).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self { units, layout, levels })
    }

    pub fn units(&self) -> &[DoseGroup] {
        &self.units
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Sorted distinct dose levels.
    pub fn dose_levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn total_n(&self) -> u64 {
        self.units.iter().map(|u| u.n as u64).sum()
    }

    pub fn total_events(&self) -> u64 {
        self.units.iter().map(|u| u.events as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// One group per distinct dose level, in increasing dose order.
    pub fn arms(&self) -> Vec<DoseGroup> {
        self.levels
            .iter()
            .map(|&dose| {
                let (n, events) = self
                    .units
                    .iter()
                    .filter(|u| u.dose == dose)
                    .fold((0, 0), |(n, e), u| (n + u.n, e + u.events));
                DoseGroup { dose, n, events }
            })
            .collect()
    }

    pub fn to_aggregated(&self) -> ObservationSet {
        ObservationSet { units: self.arms(), layout: Layout::Aggregated, levels: self.levels.clone() }
    }

    /// Expands groups into one record per subject, events first within each group.
    pub fn to_subjects(&self) -> ObservationSet {
        let units = self
            .units
            .iter()
            .flat_map(|g| (0..g.n).map(move |k| DoseGroup { dose: g.dose, n: 1, events: (k < g.events) as u32 }))
            .collect();
        ObservationSet { units, layout: Layout::Subject, levels: self.levels.clone() }
    }

    pub fn max_dose(&self) -> Option<f64> {
        self.levels.last().copied()
    }

    pub fn min_positive_dose(&self) -> Option<f64> {
        self.levels.iter().copied().find(|&d| d > 0.0)
    }

    /// Checks the preconditions shared by every estimator.
    pub fn check_fittable(&self) -> Result<()> {
        if self.levels.len() < 2 {
            return Err(EmaxError::TooFewDoseLevels { needed: 2, found: self.levels.len() });
        }
        if self.min_positive_dose().is_none() {
            return Err(EmaxError::NoPositiveDose);
        }
        Ok(())
    }
}

/// Derivatives of `eta` for one observation unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDerivs {
    pub n: f64,
    pub events: f64,
    pub pi: f64,
    /// d eta / d theta
    pub g: Vec3,
    /// d2 eta / d theta d theta
    pub h: Mat3,
    /// d3 eta / d theta^3
    pub t: Tensor3,
}

impl UnitDerivs {
    /// Bernoulli variance `pi (1 - pi)`.
    pub fn var(&self) -> f64 {
        self.pi * (1.0 - self.pi)
    }

    /// Third central moment `pi (1 - pi)(1 - 2 pi)`.
    pub fn skew(&self) -> f64 {
        self.var() * (1.0 - 2.0 * self.pi)
    }

    pub fn residual(&self) -> f64 {
        self.events - self.n * self.pi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivTensors {
    pub units: Vec<UnitDerivs>,
}

pub fn unit_derivs(params: &EmaxParams, dose: f64, n: f64, events: f64) -> UnitDerivs {
    let (f, fc) = occupancy(params.log_ed50, dose);
    let eta = params.e0 + params.emax * f;
    // d f / d log_ed50 = -f(1-f); higher orders follow by the chain rule in f.
    let f1 = -f * fc;
    let f2 = -f * fc * (f - fc);
    let f3 = -f * fc * (f * f - 4.0 * f * fc + fc * fc);

    let g = Vec3::new(1.0, f, params.emax * f1);
    let mut h = Mat3::zeros();
    h[(EMAX, LOG_ED50)] = f1;
    h[(LOG_ED50, EMAX)] = f1;
    h[(LOG_ED50, LOG_ED50)] = params.emax * f2;

    let mut t = crate::linalg::ZERO_TENSOR;
    for (r, j, l) in [(EMAX, LOG_ED50, LOG_ED50), (LOG_ED50, EMAX, LOG_ED50), (LOG_ED50, LOG_ED50, EMAX)] {
        t[r][j][l] = f2;
    }
    t[LOG_ED50][LOG_ED50][LOG_ED50] = params.emax * f3;

    UnitDerivs { n, events, pi: expit(eta), g, h, t }
}

pub fn deriv_tensors(params: &EmaxParams, data: &ObservationSet) -> DerivTensors {
    DerivTensors {
        units: data
            .units()
            .iter()
            .map(|u| unit_derivs(params, u.dose, u.n as f64, u.events as f64))
            .collect(),
    }
}

pub fn log_likelihood(params: &EmaxParams, data: &ObservationSet) -> f64 {
    data.units()
        .iter()
        .map(|u| {
            let e = eta(params, u.dose);
            let ev = u.events as f64;
            let non = (u.n - u.events) as f64;
            // log pi = -softplus(-eta), log(1 - pi) = -softplus(eta)
            let mut acc = 0.0;
            if ev > 0.0 {
                acc -= ev * softplus(-e);
            }
            if non > 0.0 {
                acc -= non * softplus(e);
            }
            acc
        })
        .sum()
}

pub fn score_from(d: &DerivTensors) -> Vec3 {
    d.units.iter().fold(Vec3::zeros(), |acc, u| acc + u.g * u.residual())
}

pub fn hessian_from(d: &DerivTensors) -> Mat3 {
    d.units
        .iter()
        .fold(Mat3::zeros(), |acc, u| acc - u.g * u.g.transpose() * (u.n * u.var()) + u.h * u.residual())
}

pub fn expected_information_from(d: &DerivTensors) -> Mat3 {
    d.units
        .iter()
        .fold(Mat3::zeros(), |acc, u| acc + u.g * u.g.transpose() * (u.n * u.var()))
}

pub fn score(params: &EmaxParams, data: &ObservationSet) -> Vec3 {
    score_from(&deriv_tensors(params, data))
}

pub fn hessian(params: &EmaxParams, data: &ObservationSet) -> Mat3 {
    hessian_from(&deriv_tensors(params, data))
}

pub fn expected_information(params: &EmaxParams, data: &ObservationSet) -> Mat3 {
    expected_information_from(&deriv_tensors(params, data))
}
