mod common;

#[test]
fn analytic_derivatives_match_finite_differences() {
    let [score, hessian, penalized, info] = common::derivative_errors(100, 11);
    assert!(score <= 1e-6, "score {score:e}");
    assert!(hessian <= 1e-5, "hessian {hessian:e}");
    assert!(penalized <= 1e-6, "penalized score {penalized:e}");
    assert!(info <= 1e-5, "dI {info:e}");
}
