//! Seeded Monte Carlo studies: data generation, replicate fitting, metric
//! aggregation and table emission.

mod metrics;
mod quadratic;
mod shape;
mod table;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Shape;
use crate::error::{EmaxError, Result};
use crate::estimators::{EstimatorKind, FitResult, FitStatus, SolverConfig, StatusReason};
use crate::inference::replicate_rng;
use crate::model::{predict_prob, DoseGroup, EmaxParams, ObservationSet};

pub use metrics::{aggregate, EstimatorRates, ParamMetrics, SimMetrics};
pub use quadratic::{fit_quadratic_logit, quadratic_peak, QuadraticFit};
pub use shape::{
    run_shape_conditioned_study, run_shape_conditioned_study_with_threads, ShapeStudyRun, MIN_ACCEPTANCE, PROBE_DRAWS,
};
pub use table::{emit_rates, emit_table, parse_table, TableFormat};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "EMAXBR_THREADS";

fn default_level() -> f64 {
    0.95
}

/// Rejection-sampling target for shape-conditioned studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeCondition {
    pub shape: Shape,
    pub n_keep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimStudy {
    pub doses: Vec<f64>,
    pub n_total: u32,
    pub truth: EmaxParams,
    pub n_reps: usize,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Wald interval level used for coverage and interval length.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ShapeCondition>,
}

impl SimStudy {
    pub fn new(doses: Vec<f64>, n_total: u32, truth: EmaxParams, n_reps: usize, seed: u64) -> Self {
        Self {
            doses,
            n_total,
            truth,
            n_reps,
            estimators: EstimatorKind::ALL.to_vec(),
            seed,
            solver: SolverConfig::default(),
            level: default_level(),
            condition: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let study: SimStudy = serde_json::from_str(text).map_err(|e| EmaxError::InvalidConfig(e.to_string()))?;
        study.validate()?;
        Ok(study)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.doses.is_empty() || self.doses.iter().any(|d| !d.is_finite() || *d < 0.0) {
            bad.push("doses");
        }
        if (self.n_total as usize) < self.doses.len().max(1) {
            bad.push("n_total");
        }
        if self.n_reps == 0 {
            bad.push("n_reps");
        }
        if self.estimators.is_empty() {
            bad.push("estimators");
        }
        if !self.truth.is_finite() {
            bad.push("truth");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            bad.push("level");
        }
        if self.condition.is_some_and(|c| c.n_keep == 0) {
            bad.push("condition.n_keep");
        }
        if self.solver.validate().is_err() {
            bad.push("solver");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(EmaxError::InvalidConfig(format!("invalid study fields: {}", bad.join(", "))))
        }
    }

    /// Estimators in canonical order without duplicates.
    pub fn estimator_set(&self) -> Vec<EstimatorKind> {
        self.estimators.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Even allocation; the remainder goes one subject each to the lowest doses.
    pub fn arm_sizes(&self) -> Vec<u32> {
        let k = self.doses.len() as u32;
        let base = self.n_total / k;
        let extra = (self.n_total % k) as usize;
        let mut order: Vec<usize> = (0..self.doses.len()).collect();
        order.sort_by(|&a, &b| self.doses[a].total_cmp(&self.doses[b]).then(a.cmp(&b)));
        let mut sizes = vec![base; self.doses.len()];
        for &i in order.iter().take(extra) {
            sizes[i] += 1;
        }
        sizes
    }
}

/// Replicate `rep` of the study: Bernoulli draws from the replicate's own stream,
/// arm by arm in dose order, subject by subject.
pub fn generate_dataset(study: &SimStudy, rep: u64) -> ObservationSet {
    let mut rng = replicate_rng(study.seed, rep);
    let groups = study
        .doses
        .iter()
        .zip(study.arm_sizes())
        .map(|(&dose, n)| {
            let p = predict_prob(&study.truth, dose);
            let events = (0..n).filter(|_| rng.random_bool(p)).count() as u32;
            DoseGroup { dose, n, events }
        })
        .collect();
    ObservationSet::from_groups(groups).expect("study doses and sizes are validated")
}

/// One line of the per-replicate audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: u64,
    pub estimator: EstimatorKind,
    pub status: FitStatus,
    pub reason: Option<StatusReason>,
    pub params: Option<EmaxParams>,
    pub std_errors: Option<[f64; 3]>,
    pub iterations: usize,
}

impl RepRecord {
    pub fn from_fit(rep: u64, fit: &FitResult) -> Self {
        Self {
            rep,
            estimator: fit.kind,
            status: fit.status,
            reason: fit.status_reason,
            params: fit.params,
            std_errors: fit.std_errors,
            iterations: fit.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRun {
    pub metrics: SimMetrics,
    pub records: Vec<RepRecord>,
}

/// Thread count from [`THREADS_ENV`], if set to a positive integer.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs `f` on a pool of `threads` workers (or the environment setting).
pub fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or_else(configured_threads) {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub(crate) fn fit_replicates(study: &SimStudy, datasets: &[(u64, ObservationSet)]) -> Vec<RepRecord> {
    let kinds = study.estimator_set();
    let per_rep: Vec<Vec<RepRecord>> = datasets
        .par_iter()
        .map(|(rep, data)| kinds.iter().map(|k| RepRecord::from_fit(*rep, &k.fit(data, &study.solver))).collect())
        .collect();
    per_rep.into_iter().flatten().collect()
}

pub fn run_study(study: &SimStudy) -> Result<StudyRun> {
    run_study_with_threads(study, None)
}

pub fn run_study_with_threads(study: &SimStudy, threads: Option<usize>) -> Result<StudyRun> {
    study.validate()?;
    with_pool(threads, || {
        let datasets: Vec<(u64, ObservationSet)> =
            (0..study.n_reps as u64).into_par_iter().map(|r| (r, generate_dataset(study, r))).collect();
        let records = fit_replicates(study, &datasets);
        let metrics = aggregate(study, &records, study.n_reps);
        Ok(StudyRun { metrics, records })
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Per-replicate audit log as CSV.
pub fn audit_csv(records: &[RepRecord]) -> String {
    let mut out = String::from("rep,estimator,status,e0,emax,log_ed50,se_e0,se_emax,se_log_ed50,iterations,reason\n");
    for r in records {
        let p = r.params.map(|p| p.to_array());
        let _ = writeln!(
            out,
            "{},{},{:?},{},{},{},{},{},{},{},{}",
            r.rep,
            r.estimator.as_str(),
            r.status,
            opt(p.map(|a| a[0])),
            opt(p.map(|a| a[1])),
            opt(p.map(|a| a[2])),
            opt(r.std_errors.map(|a| a[0])),
            opt(r.std_errors.map(|a| a[1])),
            opt(r.std_errors.map(|a| a[2])),
            r.iterations,
            r.reason.map_or("", |x| x.describe()),
        );
    }
    out
}
