//! Drives the command-line front end in-process.

use emaxbr::cli::run;

fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/turandot_aggregate.csv");
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    for args in [
        vec!["emaxbr", "diagnose", "--data", data, "--format", "csv"],
        vec!["emaxbr", "fit", "--data", data, "--estimator", "mple", "--format", "csv"],
        vec!["emaxbr", "predict", "--data", data, "--doses", "0,50,150", "--format", "csv"],
    ] {
        let code = run(args, &mut stdout, &mut stderr);
        println!("exit code {code}\n");
    }
}
