//! Command-line front end: `fit`, `predict`, `diagnose` and `simulate`.
//!
//! Exit codes: 0 when every requested fit converged, 2 when any fit is
//! unstable (or, for `diagnose`, when separation is present), 3 when any fit
//! failed, 64 on usage, input or configuration errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diagnostics::{diagnose, DiagnosticReport, Separation};
use crate::error::{EmaxError, Result};
use crate::estimators::{EstimatorKind, FitResult, FitStatus, SolverConfig, StatusReason};
use crate::inference::{bootstrap_bands, normal_quantile, wald_ci};
use crate::io::read_observations;
use crate::model::{predict_prob, EmaxParams, Layout, ObservationSet, PARAM_NAMES};
use crate::simharness::{audit_csv, emit_rates, emit_table, run_shape_conditioned_study, run_study, SimStudy, TableFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSTABLE: i32 = 2;
pub const EXIT_FAILED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "emaxbr", version, about = "Bias-reduced estimation for the binary Emax dose-response model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one or all estimators and report estimates, SEs and Wald intervals.
    Fit(FitArgs),
    /// Predicted response probabilities, optionally with bootstrap bands.
    Predict(PredictArgs),
    /// Separation, sample shape and per-arm summary.
    Diagnose(DiagnoseArgs),
    /// Run a Monte Carlo study described by a JSON file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    Subject,
    Aggregated,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Subject => Layout::Subject,
            LayoutArg::Aggregated => Layout::Aggregated,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Mle,
    Coxsnell,
    Firth,
    Mple,
    All,
}

impl EstimatorArg {
    fn kinds(self) -> Vec<EstimatorKind> {
        match self {
            Self::Mle => vec![EstimatorKind::Mle],
            Self::Coxsnell => vec![EstimatorKind::CoxSnell],
            Self::Firth => vec![EstimatorKind::Firth],
            Self::Mple => vec![EstimatorKind::Mple],
            Self::All => EstimatorKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV: `dose,y` (subject) or `dose,n,events` (aggregated).
    #[arg(long)]
    data: PathBuf,
    /// Expected layout; taken from the header when omitted.
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::default();
        if let Some(m) = self.max_iter {
            c.max_iter = m;
        }
        if let Some(g) = self.grad_tol {
            c.grad_tol = g;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "all")]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "mple")]
    estimator: EstimatorArg,
    /// Comma-separated dose grid; the observed dose levels when omitted.
    #[arg(long)]
    doses: Option<String>,
    /// Bootstrap replicates for percentile bands; 0 disables the bands.
    #[arg(long, default_value_t = 0)]
    boot: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Study definition (JSON).
    study: PathBuf,
    /// Directory receiving the metrics table, rates and audit log.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub layout: Layout,
    pub n_subjects: u64,
    pub n_events: u64,
    pub n_arms: usize,
}

impl DataSummary {
    fn of(data: &ObservationSet) -> Self {
        Self { layout: data.layout(), n_subjects: data.total_n(), n_events: data.total_events(), n_arms: data.arms().len() }
    }
}

/// One row of the estimate table: estimate, standard error and Wald interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub parameter: String,
    pub estimate: f64,
    pub std_err: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitBlock {
    pub estimator: EstimatorKind,
    pub status: FitStatus,
    pub status_reason: Option<StatusReason>,
    pub iterations: usize,
    pub params: Option<EmaxParams>,
    pub rows: Vec<ParamRow>,
    pub equation_norm: Option<f64>,
    pub base_mle: Option<EmaxParams>,
}

impl FitBlock {
    pub fn from_fit(fit: &FitResult, level: f64) -> Self {
        let rows = match fit.params {
            None => vec![],
            Some(p) => {
                let est = p.to_array();
                (0..3)
                    .map(|s| {
                        let se = fit.std_errors.map(|e| e[s]).filter(|v| v.is_finite());
                        let ci = se.and_then(|se| wald_ci(est[s], se, level).ok());
                        ParamRow {
                            parameter: PARAM_NAMES[s].to_string(),
                            estimate: est[s],
                            std_err: se,
                            lower: ci.map(|c| c.lower),
                            upper: ci.map(|c| c.upper),
                        }
                    })
                    .collect()
            }
        };
        Self {
            estimator: fit.kind,
            status: fit.status,
            status_reason: fit.status_reason,
            iterations: fit.iterations,
            params: fit.params,
            rows,
            equation_norm: fit.equation_norm,
            base_mle: fit.base_mle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub data: DataSummary,
    pub level: f64,
    pub fits: Vec<FitBlock>,
    pub diagnostics: DiagnosticReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionPoint {
    pub dose: f64,
    pub prob: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionBlock {
    pub estimator: EstimatorKind,
    pub status: FitStatus,
    pub status_reason: Option<StatusReason>,
    pub n_boot: usize,
    pub n_failed: Option<usize>,
    pub points: Vec<PredictionPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictReport {
    pub level: f64,
    pub seed: u64,
    pub method: Option<String>,
    pub predictions: Vec<PredictionBlock>,
}

fn exit_for(statuses: impl IntoIterator<Item = FitStatus>) -> i32 {
    statuses.into_iter().fold(EXIT_OK, |code, s| match s {
        FitStatus::FailedToEstimate => EXIT_FAILED,
        FitStatus::Unstable if code == EXIT_OK => EXIT_UNSTABLE,
        _ => code,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn fit_csv(report: &FitReport) -> String {
    let mut out = String::from("estimator,status,reason,parameter,estimate,std_err,lower,upper,level\n");
    for b in &report.fits {
        let reason = b.status_reason.map_or("", |r| r.describe());
        if b.rows.is_empty() {
            out.push_str(&format!("{},{:?},{reason},,,,,,{}\n", b.estimator, b.status, report.level));
        }
        for r in &b.rows {
            out.push_str(&format!(
                "{},{:?},{reason},{},{},{},{},{},{}\n",
                b.estimator,
                b.status,
                r.parameter,
                r.estimate,
                opt(r.std_err),
                opt(r.lower),
                opt(r.upper),
                report.level
            ));
        }
    }
    out
}

fn predict_csv(report: &PredictReport) -> String {
    let mut out = String::from("estimator,dose,prob,lower,upper\n");
    for b in &report.predictions {
        for p in &b.points {
            out.push_str(&format!("{},{},{},{},{}\n", b.estimator, p.dose, p.prob, opt(p.lower), opt(p.upper)));
        }
    }
    out
}

fn diagnose_csv(report: &DiagnosticReport) -> String {
    let mut out = String::from("dose,n,events,proportion\n");
    for a in &report.per_arm {
        out.push_str(&format!("{},{},{},{}\n", a.dose, a.n, a.events, a.proportion));
    }
    out
}

fn parse_doses(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| EmaxError::InvalidConfig(format!("bad dose '{}'", t.trim())))?;
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(EmaxError::InvalidConfig(format!("dose must be finite and >= 0, got {v}")))
            }
        })
        .collect()
}

fn load(args: &DataArgs) -> Result<ObservationSet> {
    read_observations(&args.data, args.layout.map(Layout::from))
}

/// Fits the requested estimators and builds the report.
pub fn fit_report(data: &ObservationSet, kinds: &[EstimatorKind], level: f64, config: &SolverConfig) -> Result<FitReport> {
    normal_quantile(level)?;
    let fits = kinds.iter().map(|k| FitBlock::from_fit(&k.fit(data, config), level)).collect();
    Ok(FitReport { data: DataSummary::of(data), level, fits, diagnostics: diagnose(data) })
}

struct Outcome {
    code: i32,
    text: String,
}

fn cmd_fit(a: &FitArgs) -> Result<Outcome> {
    let config = a.solver.config()?;
    let data = load(&a.data)?;
    let report = fit_report(&data, &a.estimator.kinds(), a.level, &config)?;
    let code = exit_for(report.fits.iter().map(|f| f.status));
    let text = match a.output.format {
        Format::Json => to_json(&report),
        Format::Csv => fit_csv(&report),
    };
    Ok(Outcome { code, text })
}

fn cmd_predict(a: &PredictArgs) -> Result<Outcome> {
    let config = a.solver.config()?;
    normal_quantile(a.level)?;
    let data = load(&a.data)?;
    let doses = match &a.doses {
        Some(t) => parse_doses(t)?,
        None => data.dose_levels().to_vec(),
    };
    let mut predictions = Vec::new();
    let mut method = None;
    for kind in a.estimator.kinds() {
        let fit = kind.fit(&data, &config);
        let mut block = PredictionBlock {
            estimator: kind,
            status: fit.status,
            status_reason: fit.status_reason,
            n_boot: a.boot,
            n_failed: None,
            points: match (fit.status, fit.params) {
                (FitStatus::FailedToEstimate, _) | (_, None) => vec![],
                (_, Some(p)) => doses
                    .iter()
                    .map(|&dose| PredictionPoint { dose, prob: predict_prob(&p, dose), lower: None, upper: None })
                    .collect(),
            },
        };
        if a.boot > 0 && !block.points.is_empty() {
            let boot = bootstrap_bands(&data, kind, &doses, a.boot, a.seed, a.level, &config)?;
            for (pt, band) in block.points.iter_mut().zip(&boot.bands) {
                pt.lower = Some(band.lower);
                pt.upper = Some(band.upper);
            }
            block.n_failed = Some(boot.n_failed);
            method = Some(boot.method);
        }
        predictions.push(block);
    }
    let code = exit_for(predictions.iter().map(|p| p.status));
    let report = PredictReport { level: a.level, seed: a.seed, method, predictions };
    let text = match a.output.format {
        Format::Json => to_json(&report),
        Format::Csv => predict_csv(&report),
    };
    Ok(Outcome { code, text })
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<Outcome> {
    let data = load(&a.data)?;
    let report = diagnose(&data);
    let code = if report.separation == Separation::None { EXIT_OK } else { EXIT_UNSTABLE };
    let text = match a.output.format {
        Format::Json => to_json(&report),
        Format::Csv => diagnose_csv(&report),
    };
    Ok(Outcome { code, text })
}

fn io_err(path: &Path, e: std::io::Error) -> EmaxError {
    EmaxError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn cmd_simulate(a: &SimulateArgs, stderr: &mut dyn Write) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.study).map_err(|e| io_err(&a.study, e))?;
    let study = SimStudy::from_json(&text)?;
    std::fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let (metrics, records) = match study.condition {
        Some(c) => {
            let run = run_shape_conditioned_study(&study, c.shape, c.n_keep)?;
            let _ = writeln!(stderr, "shape {:?}: kept {} of {} draws (acceptance {:.4})", c.shape, c.n_keep, run.draws, run.acceptance_rate);
            (run.metrics, run.records)
        }
        None => {
            let run = run_study(&study)?;
            (run.metrics, run.records)
        }
    };
    match a.format {
        Format::Csv => {
            write_file(&a.out.join("metrics.csv"), &emit_table(&metrics, TableFormat::Csv))?;
            write_file(&a.out.join("rates.csv"), &emit_rates(&metrics, TableFormat::Csv))?;
        }
        Format::Json => write_file(&a.out.join("metrics.json"), &to_json(&metrics))?,
    }
    write_file(&a.out.join("audit.csv"), &audit_csv(&records))?;
    Ok(Outcome { code: EXIT_OK, text: emit_rates(&metrics, TableFormat::Text) })
}

/// Runs the command line `args` (program name first). Reports go to `stdout`
/// or the `--out` file; messages go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let (outcome, out_path) = match &cli.command {
        Command::Fit(a) => (cmd_fit(a), a.output.out.clone()),
        Command::Predict(a) => (cmd_predict(a), a.output.out.clone()),
        Command::Diagnose(a) => (cmd_diagnose(a), a.output.out.clone()),
        Command::Simulate(a) => (cmd_simulate(a, stderr), None),
    };
    match outcome {
        Ok(o) => {
            let written = match out_path {
                Some(p) => write_file(&p, &o.text),
                None => stdout.write_all(o.text.as_bytes()).map_err(|e| EmaxError::InvalidConfig(e.to_string())),
            };
            match written {
                Ok(()) => o.code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
