use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use chyper::construction::build_submanifold;
use chyper::model::DEFAULT_STEP;
use chyper::numlab::{convergence_study, tube_chart, FieldOptions, DEFAULT_FD_STEP};
use chyper::spectral::{classify, nonexistence_scan, HypersurfaceGerm, ScanGrid, DEFAULT_TOL};
use chyper::sweep::{run_sweep, to_csv, SweepConfig};
use chyper::{Error, ModelParams, ModelSpace};

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "chyper", version, about = "Tubes around ruled minimal submanifolds of complex hyperbolic space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check brackets, curvature calibration, geodesics and transport.
    VerifyModel(VerifyArgs),
    /// Build the submanifold W^{2n-k}_phi and print its spec as JSON.
    Construct(ConstructArgs),
    /// Classify tube germs over a radius grid (CSV or JSON rows).
    Sweep(SweepArgs),
    /// Classify a germ read from a JSON file.
    Classify(ClassifyArgs),
    /// Finite-difference residual suite on a tube chart.
    Residuals(ResidualArgs),
    /// Grid search for h = 2 principal curvature data.
    Nonexistence(NonexistenceArgs),
}

#[derive(Args)]
struct Output {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Tolerance for geodesic and transport drift.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    c: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = FRAC_PI_2)]
    phi: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    c: f64,
    /// Single radius; overrides the range.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    r_min: f64,
    #[arg(long, default_value_t = 2.0)]
    r_max: f64,
    #[arg(long, default_value_t = 100)]
    rows: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Germ JSON file.
    germ: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ResidualArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, default_value_t = 0.7)]
    r: f64,
    #[arg(long, default_value_t = FRAC_PI_2)]
    phi: f64,
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    fd_step: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Pass threshold for every residual at the finest step.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct NonexistenceArgs {
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Input(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::VerificationFailed(_) => Failure::Verify(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn emit(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(output: &Output, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    emit(output, &text)
}

fn verify_model(args: &VerifyArgs) -> Outcome {
    let params = ModelParams::new(args.n, args.c)?;
    let model = ModelSpace::new(params)?;
    let curvature = model.verify_curvature(args.seed, 200)?;
    let geodesics = model.verify_geodesics(args.seed, 8, 3.0, args.step)?;
    let pass = geodesics.max() <= args.tol;
    emit_json(&args.output, &json!({ "curvature": curvature, "geodesics": geodesics, "pass": pass }))?;
    if !pass {
        return Err(Failure::Verify(format!("geodesic drift {:e} above {:e}", geodesics.max(), args.tol)));
    }
    Ok(true)
}

fn construct(args: &ConstructArgs) -> Outcome {
    let spec = build_submanifold(ModelParams::new(args.n, args.c)?, args.k, args.phi)?;
    emit_json(&args.output, &spec.to_json())?;
    Ok(true)
}

fn sweep(args: &SweepArgs) -> Outcome {
    let (r_min, r_max, rows) = match args.r {
        Some(r) => (r, r, 1),
        None => (args.r_min, args.r_max, args.rows),
    };
    let cfg = SweepConfig { n: args.n, k: args.k, c: args.c, r_min, r_max, rows, step: args.step, tol: args.tol };
    let rows = run_sweep(&cfg)?;
    match args.format {
        Format::Csv => emit(&args.output, &to_csv(&rows))?,
        Format::Json => emit_json(&args.output, &json!(rows))?,
    }
    Ok(true)
}

fn classify_cmd(args: &ClassifyArgs) -> Outcome {
    let text = fs::read_to_string(&args.germ)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", args.germ.display())))?;
    let germ: HypersurfaceGerm =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("malformed germ JSON: {e}")))?;
    let result = classify(&germ, args.tol);
    emit_json(&args.output, &result.to_json())?;
    Ok(true)
}

fn residuals(args: &ResidualArgs) -> Outcome {
    let spec = build_submanifold(ModelParams::new(args.n, args.c)?, args.k, args.phi)?;
    let chart = tube_chart(&spec, args.r, args.step, args.fd_step)?;
    let at = chart.center.clone();
    let report = convergence_study(&chart, &at, FieldOptions::default())?;
    let worst = report.fine.max();
    let pass = worst < args.tol && report.converged(1.8);
    emit_json(&args.output, &json!({ "report": report, "max_residual": worst, "pass": pass }))?;
    if !pass {
        return Err(Failure::Verify(format!(
            "max residual {worst:e}, min order {:?}",
            report.min_order
        )));
    }
    Ok(true)
}

fn nonexistence(args: &NonexistenceArgs) -> Outcome {
    let grid = ScanGrid { lambda3_points: args.grid, lambda1_points: args.grid };
    let report = nonexistence_scan(args.c, grid)?;
    let summary = format!("{} feasible / {} grid", report.feasible, report.grid_points);
    eprintln!("{summary}");
    let pass = if args.c > 0.0 {
        report.feasible == 0 && report.certificate.is_some()
    } else {
        report.feasible > 0 && report.max_curve_deviation.is_some_and(|d| d < 1e-9)
    };
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["summary"] = json!(summary);
    value["pass"] = json!(pass);
    emit_json(&args.output, &value)?;
    if !pass {
        return Err(Failure::Verify(summary));
    }
    Ok(true)
}

fn run(cli: &Cli) -> u8 {
    let outcome = match &cli.command {
        Command::VerifyModel(a) => verify_model(a),
        Command::Construct(a) => construct(a),
        Command::Sweep(a) => sweep(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Residuals(a) => residuals(a),
        Command::Nonexistence(a) => nonexistence(a),
    };
    match outcome {
        Ok(_) => 0,
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            EXIT_VERIFY
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(&Cli::parse()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn call(args: &[&str]) -> u8 {
        let cli = Cli::try_parse_from(std::iter::once("chyper").chain(args.iter().copied())).unwrap();
        run(&cli)
    }

    fn read_json(path: &Path) -> Value {
        serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn usage_errors_are_rejected_by_parser() {
        let parse = |args: &[&str]| Cli::try_parse_from(std::iter::once("chyper").chain(args.iter().copied()));
        assert!(parse(&["construct", "--k", "2"]).is_err());
        assert!(parse(&["sweep", "--n", "3", "--k", "2", "--format", "xml"]).is_err());
        assert!(parse(&["frobnicate"]).is_err());
        assert_eq!(parse(&["frobnicate"]).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn verify_model_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("v.json");
        let o = out.to_str().unwrap();
        assert_eq!(call(&["verify-model", "--n", "2", "--c", "-4", "--out", o]), 0);
        let v = read_json(&out);
        assert_eq!(v["pass"], true);
        assert!(v["curvature"]["max_residual"].as_f64().unwrap() < 1e-10);
        assert_eq!(call(&["verify-model", "--n", "3", "--c", "0", "--out", o]), 2);
        assert_eq!(call(&["verify-model", "--n", "1", "--c", "-4", "--out", o]), 2);
        // unreachable drift bound
        assert_eq!(call(&["verify-model", "--n", "2", "--c", "-4", "--tol", "1e-30", "--out", o]), 1);
    }

    #[test]
    fn construct_writes_spec() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("w.json");
        let o = out.to_str().unwrap();
        assert_eq!(call(&["construct", "--n", "3", "--k", "2", "--out", o]), 0);
        let v = read_json(&out);
        assert!(v.is_object());
        assert_eq!(call(&["construct", "--n", "3", "--k", "3", "--out", o]), 2);
        assert_eq!(call(&["construct", "--n", "4", "--k", "3", "--phi", "1.0", "--out", o]), 2);
        assert_eq!(call(&["construct", "--n", "3", "--k", "2", "--c", "4", "--out", o]), 2);
    }

    #[test]
    fn sweep_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("s.csv");
        let js = dir.path().join("s.json");
        let args = ["sweep", "--n", "3", "--k", "2", "--r-min", "0.3", "--r-max", "0.9", "--rows", "3"];
        let mut a = args.to_vec();
        a.extend(["--out", csv.to_str().unwrap()]);
        assert_eq!(call(&a), 0);
        let text = fs::read_to_string(&csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], chyper::sweep::CSV_HEADER);
        let mut a = args.to_vec();
        a.extend(["--format", "json", "--out", js.to_str().unwrap()]);
        assert_eq!(call(&a), 0);
        let v = read_json(&js);
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 3);
        for key in chyper::sweep::CSV_HEADER.split(',') {
            assert!(rows[0].get(key).is_some(), "missing {key}");
        }
        assert_eq!(call(&["sweep", "--n", "3", "--k", "2", "--r", "0.7", "--out", csv.to_str().unwrap()]), 0);
        assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);
        assert_eq!(call(&["sweep", "--n", "3", "--k", "2", "--r-min", "0", "--out", csv.to_str().unwrap()]), 2);
        assert_eq!(call(&["sweep", "--n", "3", "--k", "2", "--c", "4", "--out", csv.to_str().unwrap()]), 2);
    }

    #[test]
    fn classify_round_trip_and_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let germ_path = dir.path().join("g.json");
        let out = dir.path().join("c.json");
        let spec = build_submanifold(ModelParams::new(3, -4.0).unwrap(), 2, FRAC_PI_2).unwrap();
        let germ = chyper::jacobi::tube_shape_operator(&spec, 0.7, DEFAULT_STEP).unwrap();
        fs::write(&germ_path, serde_json::to_string(&germ).unwrap()).unwrap();
        let o = out.to_str().unwrap();
        assert_eq!(call(&["classify", germ_path.to_str().unwrap(), "--out", o]), 0);
        let v = read_json(&out);
        assert_eq!(v["model"], "tube");
        assert_eq!(v["k"], 2);
        assert!((v["r"].as_f64().unwrap() - 0.7).abs() < 1e-6);

        fs::write(&germ_path, "{\"params\": 3").unwrap();
        assert_eq!(call(&["classify", germ_path.to_str().unwrap(), "--out", o]), 2);
        let missing = dir.path().join("missing.json");
        assert_eq!(call(&["classify", missing.to_str().unwrap(), "--out", o]), 2);
    }

    #[test]
    fn nonexistence_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("n.json");
        let o = out.to_str().unwrap();
        assert_eq!(call(&["nonexistence", "--c", "4", "--grid", "100", "--out", o]), 0);
        let v = read_json(&out);
        assert_eq!(v["summary"], "0 feasible / 10000 grid");
        assert_eq!(call(&["nonexistence", "--c", "-4", "--grid", "100", "--out", o]), 0);
        assert!(read_json(&out)["feasible"].as_u64().unwrap() > 0);
        assert_eq!(call(&["nonexistence", "--c", "0", "--out", o]), 2);
        assert_eq!(call(&["nonexistence", "--c", "4", "--grid", "1", "--out", o]), 2);
    }

    #[test]
    fn residuals_pass_and_fail() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.json");
        let o = out.to_str().unwrap();
        assert_eq!(call(&["residuals", "--out", o]), 0);
        assert_eq!(read_json(&out)["pass"], true);
        assert_eq!(call(&["residuals", "--tol", "1e-12", "--out", o]), 1);
        assert_eq!(call(&["residuals", "--r=-1", "--out", o]), 2);
    }
}
