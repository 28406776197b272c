//! First-order bias of the MLE at a known truth, and how the Firth
//! adjustment relates to it.

use emaxbr::cumulants::{info_identity_residual, CumulantBundle};
use emaxbr::estimators::{cox_snell_bias, firth_adjustment};
use emaxbr::model::{expected_information, DoseGroup, EmaxParams, ObservationSet};

fn main() -> emaxbr::Result<()> {
    let truth = EmaxParams::from_ed50(-2.197, 3.583, 7.5)?;
    for n in [10, 40, 200] {
        let design = ObservationSet::from_groups(
            [0.0, 7.5, 22.5, 75.0, 225.0].iter().map(|&dose| DoseGroup { dose, n, events: 0 }).collect(),
        )?;
        let bias = cox_snell_bias(&truth, &design)?;
        let info = expected_information(&truth, &design);
        let bundle = CumulantBundle::new(&truth, &design);
        let adj = firth_adjustment(&bundle, &info.try_inverse().expect("invertible"));
        let minus_ib = -(info * bias);
        println!("n/arm={n:<4} bias={:.4?}", bias.as_slice());
        println!("          firth adjustment={:.4?}  -I*bias={:.4?}", adj.as_slice(), minus_ib.as_slice());
        println!("          identity residual {:.1e}", info_identity_residual(&bundle));
    }
    Ok(())
}
