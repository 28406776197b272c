mod common;

use emaxbr::diagnostics::{classify_shape, detect_separation};
use emaxbr::estimators::{
    cox_snell_bias, firth_modified_score, fit_cox_snell, fit_firth, fit_mle, fit_mple, penalized_score, FitStatus,
    SolverConfig,
};
use emaxbr::linalg::max_abs;
use emaxbr::model::{self, DoseGroup, EmaxParams, ObservationSet};
use proptest::prelude::*;

fn arms() -> impl Strategy<Value = Vec<DoseGroup>> {
    (3usize..=5, prop::collection::vec((1u32..=30, 0.0f64..=1.0), 5)).prop_map(|(k, cells)| {
        common::DESIGN[..k]
            .iter()
            .zip(cells)
            .map(|(&dose, (n, frac))| DoseGroup { dose, n, events: (frac * n as f64).round() as u32 })
            .collect()
    })
}

fn params() -> impl Strategy<Value = EmaxParams> {
    (-3.0f64..1.0, -2.0f64..5.0, -1.0f64..5.0).prop_map(|(a, b, c)| EmaxParams::new(a, b, c).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn likelihood_quantities_ignore_the_layout(rows in arms(), theta in params()) {
        let agg = ObservationSet::from_groups(rows).unwrap();
        let sub = agg.to_subjects();
        prop_assert!(close(model::log_likelihood(&theta, &agg), model::log_likelihood(&theta, &sub), 1e-10));
        let (ua, us) = (model::score(&theta, &agg), model::score(&theta, &sub));
        let (ia, is) = (model::expected_information(&theta, &agg), model::expected_information(&theta, &sub));
        for s in 0..3 {
            prop_assert!(close(ua[s], us[s], 1e-9));
            for t in 0..3 {
                prop_assert!(close(ia[(s, t)], is[(s, t)], 1e-9));
            }
        }
    }

    #[test]
    fn fits_ignore_the_layout(rows in arms()) {
        let agg = ObservationSet::from_groups(rows).unwrap();
        let sub = agg.to_subjects();
        let cfg = SolverConfig::default();
        let (a, b) = (fit_mple(&agg, &cfg), fit_mple(&sub, &cfg));
        prop_assert_eq!(a.status, b.status);
        if let (Some(p), Some(q)) = (a.params, b.params) {
            for (x, y) in p.to_array().into_iter().zip(q.to_array()) {
                prop_assert!(close(x, y, 1e-5), "{:?} vs {:?}", p, q);
            }
        }
    }

    #[test]
    fn converged_fits_solve_their_own_equation(rows in arms()) {
        let data = ObservationSet::from_groups(rows).unwrap();
        let cfg = SolverConfig::default();
        let tol = cfg.grad_tol * (1.0 + 1e-9);
        let mle = fit_mle(&data, &cfg);
        if mle.status != FitStatus::FailedToEstimate {
            prop_assert!(max_abs(&model::score(&mle.params.unwrap(), &data)) <= tol);
        }
        let mple = fit_mple(&data, &cfg);
        if mple.status != FitStatus::FailedToEstimate {
            prop_assert!(max_abs(&penalized_score(&mple.params.unwrap(), &data).unwrap()) <= tol);
        }
        let firth = fit_firth(&data, &cfg);
        if firth.status != FitStatus::FailedToEstimate {
            prop_assert!(max_abs(&firth_modified_score(&firth.params.unwrap(), &data).unwrap()) <= tol);
        }
        let cs = fit_cox_snell(&data, &cfg);
        prop_assert_eq!(cs.status == FitStatus::FailedToEstimate, mle.status == FitStatus::FailedToEstimate);
        if let (Some(c), Some(m)) = (cs.params, mle.params) {
            let b = cox_snell_bias(&m, &data).unwrap();
            for s in 0..3 {
                prop_assert!(close(c.to_array()[s], m.to_array()[s] - b[s], 1e-12));
            }
        }
    }

    #[test]
    fn separation_ignores_subject_order(rows in arms(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let data = ObservationSet::from_groups(rows).unwrap();
        let mut subjects: Vec<(f64, bool)> =
            data.to_subjects().units().iter().map(|u| (u.dose, u.events == 1)).collect();
        subjects.shuffle(&mut common::rng(seed));
        let shuffled = ObservationSet::from_subjects(&subjects).unwrap();
        prop_assert_eq!(detect_separation(&data), detect_separation(&shuffled));
    }

    #[test]
    fn shape_ignores_dose_units(rows in arms(), scale in 0.01f64..100.0) {
        let data = ObservationSet::from_groups(rows.clone()).unwrap();
        let scaled = ObservationSet::from_groups(
            rows.into_iter().map(|g| DoseGroup { dose: g.dose * scale, ..g }).collect(),
        )
        .unwrap();
        prop_assert_eq!(classify_shape(&data), classify_shape(&scaled));
    }

    #[test]
    fn probabilities_stay_in_the_unit_interval(theta in params(), dose in 0.0f64..1e4) {
        let p = model::predict_prob(&theta, dose);
        prop_assert!(p > 0.0 && p < 1.0);
        let q = model::predict_prob(&theta, dose * 2.0 + 1.0);
        let monotone = if theta.emax >= 0.0 { q >= p } else { q <= p };
        prop_assert!(monotone);
    }
}
