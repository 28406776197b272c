//! Separation and sample-shape diagnostics on a few hand-made datasets.

use emaxbr::diagnostics::diagnose;
use emaxbr::model::{DoseGroup, ObservationSet};

fn arms(rows: &[(f64, u32, u32)]) -> ObservationSet {
    ObservationSet::from_groups(rows.iter().map(|&(dose, n, events)| DoseGroup { dose, n, events }).collect()).unwrap()
}

fn main() {
    let cases = [
        ("concave increasing", arms(&[(0.0, 40, 4), (10.0, 40, 14), (50.0, 40, 20), (150.0, 40, 22)])),
        ("convex increasing", arms(&[(0.0, 40, 4), (50.0, 40, 6), (150.0, 40, 20)])),
        ("peak in the middle", arms(&[(0.0, 67, 2), (7.5, 63, 8), (22.5, 71, 12), (75.0, 68, 11), (225.0, 64, 4)])),
        ("complete separation", arms(&[(0.0, 10, 0), (7.5, 10, 0), (75.0, 10, 10), (225.0, 10, 10)])),
        ("quasi separation", arms(&[(0.0, 10, 0), (10.0, 10, 3), (100.0, 10, 6)])),
        ("two arms", arms(&[(0.0, 20, 3), (100.0, 20, 9)])),
    ];
    for (label, data) in cases {
        let r = diagnose(&data);
        println!("{label:<20} separation={:?} shape={:?}", r.separation, r.shape);
        for flag in &r.flags {
            println!("{:<20} - {flag}", "");
        }
    }
}
