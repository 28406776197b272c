use std::path::{Path, PathBuf};
use std::process::Command;

use emaxbr::cli::{run, EXIT_OK, EXIT_UNSTABLE, EXIT_USAGE};
use serde_json::Value;

fn asset(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(name).display().to_string()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("emaxbr").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn schema(name: &str) -> Value {
    let text = std::fs::read_to_string(asset(&format!("schemas/{name}.schema.json"))).unwrap();
    let mut s: Value = serde_json::from_str(&text).unwrap();
    // Inline the one cross-file reference.
    if name == "fit_report" {
        s["properties"]["diagnostics"] = schema("diagnose_report");
        s["properties"]["diagnostics"].as_object_mut().unwrap().remove("$id");
    }
    s
}

fn assert_valid(name: &str, report: &str) {
    let instance: Value = serde_json::from_str(report).unwrap();
    let validator = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn missing_file_is_a_usage_error_with_no_report() {
    let (code, out, err) = call(&["fit", "--data", "/nonexistent/trial.csv"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("/nonexistent/trial.csv"), "{err}");
}

#[test]
fn malformed_rows_name_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.csv", "dose,n,events\n0,10,1\n10,5,7\n");
    let (code, out, err) = call(&["fit", "--data", &f]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn interval_width_scales_with_the_normal_quantile() {
    let data = asset("data/turandot_excl225.csv");
    let width = |level: &str| {
        let (code, out, _) = call(&["fit", "--data", &data, "--estimator", "mle", "--level", level]);
        assert_eq!(code, EXIT_OK);
        let v: Value = serde_json::from_str(&out).unwrap();
        let row = &v["fits"][0]["rows"][0];
        row["upper"].as_f64().unwrap() - row["lower"].as_f64().unwrap()
    };
    let ratio = width("0.9") / width("0.95");
    assert!((ratio - 1.6449 / 1.9600).abs() < 1e-3, "{ratio}");
}

#[test]
fn fit_reports_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let separated = asset("data/separated_aggregate.csv");
    let subjects = write(dir.path(), "subjects.csv", "dose,y\n0,0\n0,0\n0,1\n10,0\n10,1\n50,1\n50,1\n50,0\n");
    for data in [asset("data/turandot_aggregate.csv"), asset("data/turandot_excl225.csv"), separated, subjects] {
        let (code, out, err) = call(&["fit", "--data", &data]);
        assert_ne!(code, EXIT_USAGE, "{err}");
        assert_valid("fit_report", &out);
    }
}

#[test]
fn predict_and_diagnose_reports_match_their_schemas() {
    let data = asset("data/turandot_aggregate.csv");
    let (_, out, _) = call(&["predict", "--data", &data, "--doses", "0,10,100", "--boot", "50", "--estimator", "firth"]);
    assert_valid("predict_report", &out);
    let (_, out, _) = call(&["predict", "--data", &data, "--doses", "5"]);
    assert_valid("predict_report", &out);
    let (_, out, _) = call(&["diagnose", "--data", &data]);
    assert_valid("diagnose_report", &out);
}

#[test]
fn diagnose_exit_codes() {
    let (code, out, _) = call(&["diagnose", "--data", &asset("data/turandot_aggregate.csv")]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["shape"], "NonMonotone");
    assert_eq!(v["separation"], "None");

    let (code, out, _) = call(&["diagnose", "--data", &asset("data/separated_aggregate.csv")]);
    assert_eq!(code, EXIT_UNSTABLE);
    assert_eq!(serde_json::from_str::<Value>(&out).unwrap()["separation"], "Complete");

    let dir = tempfile::tempdir().unwrap();
    let single = write(dir.path(), "one.csv", "dose,n,events\n10,20,5\n");
    let (_, out, _) = call(&["diagnose", "--data", &single]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["shape"].is_null());
    assert!(v["flags"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().contains("arm")), "{v}");
    assert_eq!(v["separation"], "None");
    assert_valid("diagnose_report", &out);
}

#[test]
fn csv_output_has_a_stable_header() {
    let (_, out, _) = call(&["fit", "--data", &asset("data/turandot_excl225.csv"), "--format", "csv"]);
    assert!(out.starts_with("estimator,status,reason,parameter,estimate,std_err,lower,upper,level\n"));
    assert_eq!(out.lines().count(), 1 + 4 * 3);
}

fn study(dir: &Path, n_reps: i64) -> String {
    let body = format!(
        r#"{{"doses":[0,7.5,22.5,75,225],"n_total":100,"truth":{{"e0":-2.197,"emax":3.583,"log_ed50":2.015}},
        "n_reps":{n_reps},"estimators":["mle","mple"],"seed":7}}"#
    );
    write(dir, "study.json", &body)
}

#[test]
fn invalid_study_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let s = study(dir.path(), 0);
    let (code, _, err) = call(&["simulate", &s, "--out", &dir.path().display().to_string()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("n_reps"), "{err}");
}

fn simulate_files(threads: &str, dir: &Path, study_path: &str, format: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let out = dir.join(format!("run-{threads}-{format}"));
    let status = Command::new(env!("CARGO_BIN_EXE_emaxbr"))
        .args(["simulate", study_path, "--out", &out.display().to_string(), "--format", format])
        .env("EMAXBR_THREADS", threads)
        .status()
        .unwrap();
    assert!(status.success());
    let mut files: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let s = study(dir.path(), 40);
    let base = simulate_files("1", dir.path(), &s, "csv");
    let names: Vec<_> = base.iter().map(|(p, _)| p.display().to_string()).collect();
    assert_eq!(names, ["audit.csv", "metrics.csv", "rates.csv"]);
    assert_eq!(simulate_files("4", dir.path(), &s, "csv"), base);
    let json = simulate_files("2", dir.path(), &s, "json");
    let metrics = json.iter().find(|(p, _)| p.ends_with("metrics.json")).unwrap();
    assert_valid("sim_metrics", std::str::from_utf8(&metrics.1).unwrap());
}

#[test]
fn binary_reports_usage_errors() {
    let out = Command::new(env!("CARGO_BIN_EXE_emaxbr")).args(["fit"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let out = Command::new(env!("CARGO_BIN_EXE_emaxbr")).args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8(out.stdout).unwrap();
    for sub in ["fit", "predict", "diagnose", "simulate"] {
        assert!(help.contains(sub));
    }
}
