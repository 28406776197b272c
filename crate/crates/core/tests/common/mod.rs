#![allow(dead_code)]

use emaxbr::model::{DoseGroup, EmaxParams, ObservationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DESIGN: [f64; 5] = [0.0, 7.5, 22.5, 75.0, 225.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn groups(rows: &[(f64, u32, u32)]) -> ObservationSet {
    ObservationSet::from_groups(rows.iter().map(|&(dose, n, events)| DoseGroup { dose, n, events }).collect()).unwrap()
}

pub fn random_params(r: &mut ChaCha8Rng) -> EmaxParams {
    EmaxParams::new(r.random_range(-3.0..1.0), r.random_range(-2.0..5.0), r.random_range(-1.0..5.0)).unwrap()
}

/// Random arms on random doses; events are arbitrary, so score and Hessian
/// are exercised away from their expectations.
pub fn random_data(r: &mut ChaCha8Rng) -> ObservationSet {
    let k = r.random_range(3..=6);
    let mut doses: Vec<f64> = vec![0.0];
    while doses.len() < k {
        let d = (r.random_range(0.5f64..300.0) * 10.0).round() / 10.0;
        if !doses.contains(&d) {
            doses.push(d);
        }
    }
    let rows: Vec<DoseGroup> = doses
        .into_iter()
        .map(|dose| {
            let n = r.random_range(3..=40);
            DoseGroup { dose, n, events: r.random_range(0..=n) }
        })
        .collect();
    ObservationSet::from_groups(rows).unwrap()
}

fn split(doses: &[f64], n: u32, cut: usize, increasing: bool) -> ObservationSet {
    let rows: Vec<(f64, u32, u32)> =
        doses.iter().enumerate().map(|(i, &d)| (d, n, if (i >= cut) == increasing { n } else { 0 })).collect();
    groups(&rows)
}

/// Fifty constructed separation instances as `(data, is_complete)`.
pub fn separation_corpus() -> Vec<(ObservationSet, bool)> {
    let mut out = Vec::new();
    let designs: [&[f64]; 3] = [&DESIGN, &[0.0, 10.0, 30.0, 100.0], &[0.0, 50.0, 150.0]];
    for doses in designs {
        let k = doses.len() as u32;
        for n in [5u32, 10, 20] {
            // Complete: non-responders below the cut, responders from it on.
            for cut in 1..doses.len() {
                out.push((split(doses, n, cut, true), true));
            }
            // Quasi: one pure outermost arm, the others mixed.
            let top: Vec<(f64, u32, u32)> = doses
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, n, if i as u32 == k - 1 { n } else { n * (i as u32 + 1) / (k + 1) }))
                .collect();
            out.push((groups(&top), false));
            let bottom: Vec<(f64, u32, u32)> = doses
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, n, if i == 0 { 0 } else { (n * (i as u32 + 1) / (k + 1)).max(1) }))
                .collect();
            out.push((groups(&bottom), false));
        }
        // Decreasing direction.
        out.push((split(doses, 10, doses.len() / 2, false), true));
    }
    out.push((split(&DESIGN, 20, 2, false), true));
    out.push((split(&[0.0, 7.5, 75.0, 225.0], 10, 2, true), true));
    out
}

/// Five-point central difference of `f` along coordinate `s`.
pub fn fd<F: Fn(&[f64; 3]) -> f64>(f: F, at: [f64; 3], s: usize) -> f64 {
    let h = 1e-3 * at[s].abs().max(1.0);
    let shifted = |k: f64| {
        let mut x = at;
        x[s] += k * h;
        f(&x)
    };
    (shifted(-2.0) - 8.0 * shifted(-1.0) + 8.0 * shifted(1.0) - shifted(2.0)) / (12.0 * h)
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn p(a: &[f64; 3]) -> EmaxParams {
    EmaxParams::from_array(*a)
}

/// Worst relative errors of the four analytic derivatives against finite
/// differences over `n` random configurations:
/// `[score, hessian, penalized score, dI]`.
pub fn derivative_errors(n: usize, seed: u64) -> [f64; 4] {
    use emaxbr::{cumulants, estimators, model};
    let mut r = rng(seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..n {
        let theta = random_params(&mut r);
        let data = random_data(&mut r);
        let at = theta.to_array();

        let u = model::score(&theta, &data);
        let fd_u: Vec<f64> = (0..3).map(|s| fd(|x| model::log_likelihood(&p(x), &data), at, s)).collect();
        let scale = u.amax();
        worst[0] = worst[0].max((0..3).map(|s| rel((u[s] - fd_u[s]).abs(), scale)).fold(0.0, f64::max));

        let h = model::hessian(&theta, &data);
        let scale = h.amax();
        for j in 0..3 {
            for s in 0..3 {
                let fd_h = fd(|x| model::score(&p(x), &data)[j], at, s);
                worst[1] = worst[1].max(rel((h[(j, s)] - fd_h).abs(), scale));
            }
        }

        let us = estimators::penalized_score(&theta, &data).unwrap();
        let scale = us.amax();
        for s in 0..3 {
            let fd_us = fd(|x| estimators::penalized_loglik(&p(x), &data), at, s);
            worst[2] = worst[2].max(rel((us[s] - fd_us).abs(), scale));
        }

        let di = cumulants::info_derivative(&theta, &data);
        let scale = di.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..3 {
            for b in 0..3 {
                for s in 0..3 {
                    let fd_i = fd(|x| model::expected_information(&p(x), &data)[(a, b)], at, s);
                    worst[3] = worst[3].max(rel((di[a][b][s] - fd_i).abs(), scale));
                }
            }
        }
    }
    worst
}

/// Worst entrywise residual of `dI/dtheta_s = P_s + 2 kappa_sym` over `n` random configurations.
pub fn identity_residual(n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let theta = random_params(&mut r);
            let data = random_data(&mut r);
            emaxbr::cumulants::info_identity_residual(&emaxbr::cumulants::CumulantBundle::new(&theta, &data))
        })
        .fold(0.0, f64::max)
}

/// Subject-level datasets with at most 12 subjects.
pub fn small_corpus(n: usize, seed: u64) -> Vec<(EmaxParams, ObservationSet)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let theta = random_params(&mut r);
            let size = r.random_range(3..=12);
            let levels = [0.0, 2.5, 10.0, 40.0, 160.0];
            let subjects: Vec<(f64, bool)> =
                (0..size).map(|i| (levels[i % levels.len()], r.random_bool(0.5))).collect();
            (theta, ObservationSet::from_subjects(&subjects).unwrap())
        })
        .collect()
}

/// Exact expectations over all `2^n` outcome vectors compared with the closed
/// forms: worst relative error over `[kappa_rjl, kappa_rj_l, P]`.
pub fn enumeration_errors(corpus: &[(EmaxParams, ObservationSet)]) -> [f64; 3] {
    use emaxbr::{cumulants, model};
    let mut worst = [0.0f64; 3];
    for (theta, data) in corpus {
        let units = data.units();
        let probs: Vec<f64> = units.iter().map(|u| model::predict_prob(theta, u.dose)).collect();
        let mut k_rj_l = [[[0.0; 3]; 3]; 3];
        let mut k_r_j_l = [[[0.0; 3]; 3]; 3];
        for mask in 0u32..(1 << units.len()) {
            let mut weight = 1.0;
            let subjects: Vec<(f64, bool)> = units
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let y = mask >> i & 1 == 1;
                    weight *= if y { probs[i] } else { 1.0 - probs[i] };
                    (u.dose, y)
                })
                .collect();
            let outcome = ObservationSet::from_subjects(&subjects).unwrap();
            let u = model::score(theta, &outcome);
            let h = model::hessian(theta, &outcome);
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        k_rj_l[a][b][c] += weight * h[(a, b)] * u[c];
                        k_r_j_l[a][b][c] += weight * u[a] * u[b] * u[c];
                    }
                }
            }
        }
        // Third Bartlett identity.
        let mut k_rjl = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    k_rjl[a][b][c] = -(k_rj_l[a][b][c] + k_rj_l[a][c][b] + k_rj_l[b][c][a] + k_r_j_l[a][b][c]);
                }
            }
        }
        let bundle = cumulants::CumulantBundle::new(theta, data);
        for (slot, (exact, closed)) in [(&k_rjl, &bundle.k3), (&k_rj_l, &bundle.k2_1), (&k_r_j_l, &bundle.p)].into_iter().enumerate() {
            let scale = closed.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        worst[slot] = worst[slot].max(rel((exact[a][b][c] - closed[a][b][c]).abs(), scale));
                    }
                }
            }
        }
    }
    worst
}

/// Outcome of the separation check on one instance.
#[derive(Debug)]
pub struct SeparationCase {
    pub complete: bool,
    pub mle_failed: bool,
    pub firth_ok: bool,
    pub mple_ok: bool,
    pub mple_finite: bool,
}

fn finite_converged(fit: &emaxbr::estimators::FitResult, data: &ObservationSet) -> bool {
    fit.is_converged()
        && fit.params.is_some_and(|q| {
            q.is_finite()
                && data.dose_levels().iter().all(|&d| {
                    let pr = emaxbr::model::predict_prob(&q, d);
                    (1e-4..=1.0 - 1e-4).contains(&pr)
                })
        })
}

pub fn separation_cases() -> Vec<SeparationCase> {
    use emaxbr::estimators::{fit_firth, fit_mle, fit_mple, FitStatus, SolverConfig};
    let cfg = SolverConfig::default();
    separation_corpus()
        .into_iter()
        .map(|(data, complete)| {
            let mple = fit_mple(&data, &cfg);
            SeparationCase {
                complete,
                mle_failed: fit_mle(&data, &cfg).status == FitStatus::FailedToEstimate,
                firth_ok: finite_converged(&fit_firth(&data, &cfg), &data),
                mple_ok: finite_converged(&mple, &data),
                mple_finite: mple.is_converged() && mple.params.is_some_and(|q| q.is_finite()),
            }
        })
        .collect()
}

/// Serialized artifacts of a seeded study, a shape-conditioned study and a
/// bootstrap run on `threads` workers.
pub fn seeded_artifacts(threads: usize) -> Vec<String> {
    use emaxbr::diagnostics::Shape;
    use emaxbr::estimators::{EstimatorKind, SolverConfig};
    use emaxbr::simharness::{self as sh, SimStudy, TableFormat};
    let truth = EmaxParams::new(-2.197, 3.583, 7.5f64.ln()).unwrap();
    let study = SimStudy::new(DESIGN.to_vec(), 60, truth, 64, 99);
    let run = sh::run_study_with_threads(&study, Some(threads)).unwrap();
    let mut shaped = SimStudy::new(vec![0.0, 50.0, 150.0], 60, EmaxParams::new(-2.197, 2.197, 25f64.ln()).unwrap(), 1, 5);
    shaped.estimators = vec![EstimatorKind::Mple];
    let cond = sh::run_shape_conditioned_study_with_threads(&shaped, Shape::NonMonotone, 30, Some(threads)).unwrap();
    let data = groups(&[(0.0, 67, 2), (7.5, 63, 8), (22.5, 71, 12), (75.0, 68, 11), (225.0, 64, 4)]);
    let boot = sh::with_pool(Some(threads), || {
        emaxbr::inference::bootstrap_bands(&data, EstimatorKind::Mple, &[0.0, 10.0, 100.0], 64, 3, 0.95, &SolverConfig::default())
    })
    .unwrap();
    vec![
        sh::emit_table(&run.metrics, TableFormat::Csv),
        sh::audit_csv(&run.records),
        sh::emit_table(&cond.metrics, TableFormat::Csv),
        format!("{} {}", cond.draws, sh::audit_csv(&cond.records)),
        serde_json::to_string(&boot).unwrap(),
    ]
}

/// Monte Carlo MLE bias at the reference truth against the analytic O(1/n)
/// term: per parameter `(mc_bias, mc_se, analytic, z)` and the replicate count used.
pub fn bias_check(n_total: u32, reps: usize, seed: u64) -> ([(f64, f64, f64, f64); 3], usize) {
    use emaxbr::estimators::{cox_snell_bias, EstimatorKind, FitStatus};
    use emaxbr::simharness::{run_study, SimStudy};
    let truth = EmaxParams::new(-2.197, 3.583, 7.5f64.ln()).unwrap();
    let mut study = SimStudy::new(DESIGN.to_vec(), n_total, truth, reps, seed);
    study.estimators = vec![EstimatorKind::Mle];
    let run = run_study(&study).unwrap();
    let used: Vec<[f64; 3]> = run
        .records
        .iter()
        .filter(|r| r.status == FitStatus::Converged)
        .map(|r| r.params.unwrap().to_array())
        .collect();
    let design = ObservationSet::from_groups(
        study.doses.iter().zip(study.arm_sizes()).map(|(&dose, n)| DoseGroup { dose, n, events: 0 }).collect(),
    )
    .unwrap();
    let analytic = cox_snell_bias(&truth, &design).unwrap();
    let n = used.len() as f64;
    let out = std::array::from_fn(|s| {
        let err: Vec<f64> = used.iter().map(|p| p[s] - truth.to_array()[s]).collect();
        let m = err.iter().sum::<f64>() / n;
        let sd = (err.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt();
        (m, se, analytic[s], (m - analytic[s]) / se)
    });
    (out, used.len())
}
