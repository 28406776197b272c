//! Stratified bootstrap bands for the fitted response probability curve.
//! Usage: bootstrap_bands [n_boot] [seed]

use emaxbr::estimators::{EstimatorKind, SolverConfig};
use emaxbr::inference::bootstrap_bands;
use emaxbr::model::{DoseGroup, ObservationSet};

fn main() -> emaxbr::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_boot = args.next().map_or(500, |s| s.parse().expect("n_boot"));
    let seed = args.next().map_or(1, |s| s.parse().expect("seed"));
    let data = ObservationSet::from_groups(vec![
        DoseGroup { dose: 0.0, n: 67, events: 2 },
        DoseGroup { dose: 7.5, n: 63, events: 8 },
        DoseGroup { dose: 22.5, n: 71, events: 12 },
        DoseGroup { dose: 75.0, n: 68, events: 11 },
        DoseGroup { dose: 225.0, n: 64, events: 4 },
    ])?;
    let doses: Vec<f64> = (0..=12).map(|i| 20.0 * i as f64).collect();
    let out = bootstrap_bands(&data, EstimatorKind::Mple, &doses, n_boot, seed, 0.95, &SolverConfig::default())?;
    println!("{} ({} of {n_boot} resamples failed)", out.method, out.n_failed);
    for b in &out.bands {
        println!("  d={:>5.0}  p={:.3}  [{:.3}, {:.3}]", b.dose, b.point, b.lower, b.upper);
    }
    Ok(())
}
