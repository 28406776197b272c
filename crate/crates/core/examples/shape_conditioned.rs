//! Operating characteristics conditional on a non-monotone sample shape,
//! using rejection sampling over a three-arm design.
//! Usage: shape_conditioned [n_keep]

use emaxbr::diagnostics::Shape;
use emaxbr::estimators::EstimatorKind;
use emaxbr::model::EmaxParams;
use emaxbr::simharness::{emit_rates, emit_table, run_shape_conditioned_study, SimStudy, TableFormat};

fn main() -> emaxbr::Result<()> {
    let n_keep = std::env::args().nth(1).map_or(200, |s| s.parse().expect("n_keep"));
    let truth = EmaxParams::from_ed50(-2.197, 2.197, 25.0)?;
    let mut study = SimStudy::new(vec![0.0, 50.0, 150.0], 210, truth, 1, 20240601);
    study.estimators = vec![EstimatorKind::Mle, EstimatorKind::Mple];
    let run = run_shape_conditioned_study(&study, Shape::NonMonotone, n_keep)?;
    println!("kept {n_keep} of {} draws (acceptance {:.3})", run.draws, run.acceptance_rate);
    print!("{}", emit_rates(&run.metrics, TableFormat::Text));
    print!("{}", emit_table(&run.metrics, TableFormat::Text));
    Ok(())
}
