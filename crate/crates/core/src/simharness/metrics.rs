use serde::{Deserialize, Serialize};

use crate::estimators::{EstimatorKind, FitStatus};
use crate::inference::normal_quantile;
use crate::model::PARAM_NAMES;

use super::{RepRecord, SimStudy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMetrics {
    pub estimator: EstimatorKind,
    pub parameter: String,
    pub truth: f64,
    #[serde(rename = "estimate")]
    pub mean_estimate: f64,
    pub mbe: f64,
    pub mse: f64,
    #[serde(rename = "est_se")]
    pub mean_se: f64,
    #[serde(rename = "cp")]
    pub coverage: f64,
    #[serde(rename = "est_length")]
    pub mean_ci_length: f64,
    /// Replicates with an estimate (failures excluded).
    pub n_used: usize,
    /// Replicates with an estimate and a defined standard error.
    pub n_used_se: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRates {
    pub estimator: EstimatorKind,
    pub n_reps: usize,
    pub fail_pct: f64,
    pub unstable_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub level: f64,
    pub rows: Vec<ParamMetrics>,
    pub rates: Vec<EstimatorRates>,
}

impl SimMetrics {
    pub fn row(&self, kind: EstimatorKind, parameter: &str) -> Option<&ParamMetrics> {
        self.rows.iter().find(|r| r.estimator == kind && r.parameter == parameter)
    }

    pub fn rates_for(&self, kind: EstimatorKind) -> Option<&EstimatorRates> {
        self.rates.iter().find(|r| r.estimator == kind)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Aggregates per-replicate records. Failed replicates are excluded from every
/// metric; interval metrics additionally need a defined standard error.
pub fn aggregate(study: &SimStudy, records: &[RepRecord], n_reps: usize) -> SimMetrics {
    let z = normal_quantile(study.level).unwrap_or(f64::NAN);
    let truth = study.truth.to_array();
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for kind in study.estimator_set() {
        let mine: Vec<&RepRecord> = records.iter().filter(|r| r.estimator == kind).collect();
        let total = mine.len().max(1) as f64;
        let failed = mine.iter().filter(|r| r.status == FitStatus::FailedToEstimate || r.params.is_none()).count();
        let unstable = mine.iter().filter(|r| r.status == FitStatus::Unstable && r.params.is_some()).count();
        rates.push(EstimatorRates {
            estimator: kind,
            n_reps,
            fail_pct: 100.0 * failed as f64 / total,
            unstable_pct: 100.0 * unstable as f64 / total,
        });
        let used: Vec<&RepRecord> =
            mine.iter().copied().filter(|r| r.status != FitStatus::FailedToEstimate && r.params.is_some()).collect();
        for (s, name) in PARAM_NAMES.iter().enumerate() {
            let est: Vec<f64> = used.iter().map(|r| r.params.unwrap().to_array()[s]).collect();
            let err: Vec<f64> = est.iter().map(|e| e - truth[s]).collect();
            let sq: Vec<f64> = err.iter().map(|e| e * e).collect();
            let with_se: Vec<(f64, f64)> = used
                .iter()
                .filter_map(|r| {
                    let se = r.std_errors?[s];
                    se.is_finite().then(|| (r.params.unwrap().to_array()[s], se))
                })
                .collect();
            let ses: Vec<f64> = with_se.iter().map(|&(_, se)| se).collect();
            let covered: Vec<f64> = with_se
                .iter()
                .map(|&(e, se)| if (e - truth[s]).abs() <= z * se { 1.0 } else { 0.0 })
                .collect();
            let lengths: Vec<f64> = ses.iter().map(|se| 2.0 * z * se).collect();
            rows.push(ParamMetrics {
                estimator: kind,
                parameter: name.to_string(),
                truth: truth[s],
                mean_estimate: mean(&est),
                mbe: mean(&err),
                mse: mean(&sq),
                mean_se: mean(&ses),
                coverage: mean(&covered),
                mean_ci_length: mean(&lengths),
                n_used: est.len(),
                n_used_se: with_se.len(),
            });
        }
    }
    SimMetrics { level: study.level, rows, rates }
}
