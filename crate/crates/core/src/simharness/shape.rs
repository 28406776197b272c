use rayon::prelude::*;

use crate::diagnostics::{classify_shape, Shape};
use crate::error::{EmaxError, Result};
use crate::model::ObservationSet;

use super::{aggregate, fit_replicates, generate_dataset, with_pool, RepRecord, SimMetrics, SimStudy};

/// Size of the acceptance-rate probe.
pub const PROBE_DRAWS: u64 = 100_000;
/// Lowest acceptance rate tolerated over the probe.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeStudyRun {
    pub metrics: SimMetrics,
    pub records: Vec<RepRecord>,
    pub target: Shape,
    /// Datasets drawn before `n_keep` matches were found.
    pub draws: u64,
    pub acceptance_rate: f64,
}

/// Rejection-samples replicates until `n_keep` of them have the target sample
/// shape, then fits and aggregates those exactly as a plain study.
pub fn run_shape_conditioned_study(study: &SimStudy, target: Shape, n_keep: usize) -> Result<ShapeStudyRun> {
    run_shape_conditioned_study_with_threads(study, target, n_keep, None)
}

pub fn run_shape_conditioned_study_with_threads(
    study: &SimStudy,
    target: Shape,
    n_keep: usize,
    threads: Option<usize>,
) -> Result<ShapeStudyRun> {
    study.validate()?;
    if n_keep == 0 {
        return Err(EmaxError::InvalidConfig("n_keep must be positive".into()));
    }
    with_pool(threads, || {
        let mut kept: Vec<(u64, ObservationSet)> = Vec::with_capacity(n_keep);
        let mut draws = 0u64;
        while kept.len() < n_keep {
            let start = draws;
            let chunk: Vec<Option<(u64, ObservationSet)>> = (start..start + CHUNK)
                .into_par_iter()
                .map(|i| {
                    let data = generate_dataset(study, i);
                    (classify_shape(&data).ok() == Some(target)).then_some((i, data))
                })
                .collect();
            draws = start + CHUNK;
            for (i, data) in chunk.into_iter().flatten() {
                kept.push((i, data));
                if kept.len() == n_keep {
                    draws = i + 1;
                    break;
                }
            }
            if draws >= PROBE_DRAWS && (kept.len() as f64) < MIN_ACCEPTANCE * draws as f64 {
                return Err(EmaxError::ShapeUnreachable { rate: kept.len() as f64 / draws as f64, probes: draws as usize });
            }
        }
        let records = fit_replicates(study, &kept);
        let metrics = aggregate(study, &records, kept.len());
        Ok(ShapeStudyRun { metrics, records, target, draws, acceptance_rate: kept.len() as f64 / draws as f64 })
    })
}
