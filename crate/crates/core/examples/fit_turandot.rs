//! Fits the four estimators to the bundled four-arm trial aggregate and
//! prints estimates with 95% Wald intervals.

use std::path::Path;

use emaxbr::estimators::{EstimatorKind, SolverConfig};
use emaxbr::inference::wald_ci;
use emaxbr::io::read_observations;
use emaxbr::model::PARAM_NAMES;

fn main() -> emaxbr::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/turandot_excl225.csv");
    let data = read_observations(&path, None)?;
    let config = SolverConfig::default();
    println!("{:<9} {:<17} {:>9} {:>9} {:>22}", "estimator", "status", "param", "estimate", "95% CI");
    for kind in EstimatorKind::ALL {
        let fit = kind.fit(&data, &config);
        let Some(params) = fit.params else {
            println!("{:<9} {:?} ({:?})", kind.as_str(), fit.status, fit.status_reason);
            continue;
        };
        for (s, name) in PARAM_NAMES.iter().enumerate() {
            let est = params.to_array()[s];
            let ci = fit.std_errors.and_then(|se| wald_ci(est, se[s], 0.95).ok());
            let ci = ci.map_or("-".to_string(), |c| format!("[{:.3}, {:.3}]", c.lower, c.upper));
            println!("{:<9} {:<17} {:>9} {:>9.3} {:>22}", kind.as_str(), format!("{:?}", fit.status), name, est, ci);
        }
    }
    Ok(())
}
