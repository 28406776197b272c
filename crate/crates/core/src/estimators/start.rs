//! Deterministic starting values: grid over log ED50 with a two-parameter
//! logistic fit of `(E0, Emax)` at each grid point on continuity-corrected arms.

use crate::error::{EmaxError, Result};
use crate::model::{logit, softplus, EmaxParams, ObservationSet};

const GRID_POINTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartingValues {
    pub params: EmaxParams,
    /// All responses identical across arms; `Emax` was set to zero.
    pub degenerate: bool,
}

pub(crate) struct Arm {
    pub x: f64,
    pub n: f64,
    pub events: f64,
}

/// Two-parameter logistic fit of corrected arm counts on covariate `x`.
/// Returns `(intercept, slope, loglik)`.
pub(crate) fn logistic2(arms: &[Arm], a0: f64) -> (f64, f64, f64) {
    let ll = |a: f64, b: f64| -> f64 {
        arms.iter()
            .map(|r| {
                let eta = a + b * r.x;
                -r.events * softplus(-eta) - (r.n - r.events) * softplus(eta)
            })
            .sum()
    };
    let (mut a, mut b) = (a0, 0.0);
    let mut cur = ll(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in arms {
            let p = crate::model::expit(a + b * r.x);
            let res = r.events - r.n * p;
            let w = r.n * p * (1.0 - p);
            ga += res;
            gb += res * r.x;
            haa += w;
            hab += w * r.x;
            hbb += w * r.x * r.x;
        }
        if ga.abs().max(gb.abs()) < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 1e-14 * (haa * hbb).max(1e-300) {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga / haa.max(1e-12), 0.0)
        };
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let (na, nb) = (a + step * da, b + step * db);
            let v = ll(na, nb);
            if v.is_finite() && v >= cur {
                a = na;
                b = nb;
                cur = v;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, b, cur)
}

pub fn starting_values(data: &ObservationSet) -> Result<StartingValues> {
    data.check_fittable()?;
    let arms = data.arms();
    let d2 = data.min_positive_dose().ok_or(EmaxError::NoPositiveDose)?;
    let dmax = data.max_dose().ok_or(EmaxError::NoPositiveDose)?;
    let lowest = arms[0];
    let e0_start = logit((lowest.events as f64 + 0.5) / (lowest.n as f64 + 1.0));

    let lo = (0.1 * d2).ln();
    let hi = (5.0 * dmax).ln();
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();

    let all_zero = arms.iter().all(|a| a.events == 0);
    let all_one = arms.iter().all(|a| a.events == a.n);
    if all_zero || all_one {
        return Ok(StartingValues {
            params: EmaxParams { e0: e0_start, emax: 0.0, log_ed50: grid[GRID_POINTS / 2] },
            degenerate: true,
        });
    }

    let mut best: Option<(f64, EmaxParams)> = None;
    for &phi in &grid {
        let corrected: Vec<Arm> = arms
            .iter()
            .map(|a| Arm {
                x: crate::model::eta(&EmaxParams { e0: 0.0, emax: 1.0, log_ed50: phi }, a.dose),
                n: a.n as f64 + 1.0,
                events: a.events as f64 + 0.5,
            })
            .collect();
        let (e0, emax, ll) = logistic2(&corrected, e0_start);
        if !ll.is_finite() {
            continue;
        }
        if best.is_none_or(|(b, _)| ll > b) {
            best = Some((ll, EmaxParams { e0, emax, log_ed50: phi }));
        }
    }
    let (_, params) = best.ok_or_else(|| EmaxError::InvalidData("no finite starting value on the grid".into()))?;
    Ok(StartingValues { params, degenerate: false })
}
