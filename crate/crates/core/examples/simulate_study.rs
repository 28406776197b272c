//! A seeded Monte Carlo study of the four estimators at the reference design.
//! Usage: simulate_study [n_total] [n_reps]

use emaxbr::model::EmaxParams;
use emaxbr::simharness::{emit_rates, emit_table, run_study, SimStudy, TableFormat};

fn main() -> emaxbr::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_total = args.next().map_or(50, |s| s.parse().expect("n_total"));
    let n_reps = args.next().map_or(200, |s| s.parse().expect("n_reps"));
    let truth = EmaxParams::from_ed50(-2.197, 3.583, 7.5)?;
    let study = SimStudy::new(vec![0.0, 7.5, 22.5, 75.0, 225.0], n_total, truth, n_reps, 20240601);
    let run = run_study(&study)?;
    print!("{}", emit_rates(&run.metrics, TableFormat::Text));
    println!();
    print!("{}", emit_table(&run.metrics, TableFormat::Text));
    Ok(())
}
