use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sobolev_fit::{select::read_sweep_csv, ClassificationMetrics, FitReport, GridSpec, KernelModel, SpectralField};
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn sobfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sobfit")).args(args).output().unwrap()
}

fn run(args: &[&str], code: i32) -> Output {
    let out = sobfit(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "args {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_field(dir: &Path, samples: Vec<usize>) -> SpectralField {
    SpectralField::read_csv(File::open(dir.join("field.csv")).unwrap(), GridSpec::new(samples).unwrap()).unwrap()
}

fn read_report(dir: &Path) -> FitReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn demo_fit(dir: &Path, solver: &str, extra: &[&str]) -> Output {
    let d = data("demo_1d.csv");
    let mut args = vec![
        "fit", "--data", s(&d), "--grid", "32", "--k", "1", "--lambda", "0.1", "--solver", solver,
        "--out", s(dir),
    ];
    args.extend_from_slice(extra);
    sobfit(&args)
}

#[test]
fn fit_zero_dataset_gives_zero_field() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("zero.csv");
    fs::write(&csv, "x1,a\n0.2,0\n0.6,0\n").unwrap();
    let out = tmp.path().join("out");
    run(&["fit", "--data", s(&csv), "--grid", "16", "--lambda", "1", "--out", s(&out)], 0);
    assert!(read_field(&out, vec![16]).values().iter().all(|&v| v == 0.0));
}

#[test]
fn gd_and_linear_fields_agree() {
    let tmp = TempDir::new().unwrap();
    let (gd, lin) = (tmp.path().join("gd"), tmp.path().join("lin"));
    assert_eq!(demo_fit(&gd, "gd", &[]).status.code(), Some(0));
    assert_eq!(demo_fit(&lin, "linear", &[]).status.code(), Some(0));
    let (a, b) = (read_field(&gd, vec![32]), read_field(&lin, vec![32]));
    let diff = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-6, "{diff:e}");
    let report = read_report(&gd);
    assert!(report.converged);
    assert_eq!(report.data_residuals.len(), 5);
    assert!(report.learning_rate.is_some());
}

#[test]
fn kernel_fit_writes_loadable_model() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(demo_fit(tmp.path(), "kernel", &["--trunc", "64"]).status.code(), Some(0));
    let model = KernelModel::from_json(&fs::read_to_string(tmp.path().join("kernel_model.json")).unwrap()).unwrap();
    assert_eq!(model.truncation, 64);
    let field = read_field(tmp.path(), vec![32]);
    let x = GridSpec::new(vec![32]).unwrap().coordinates(5);
    assert!((model.predict(&x).unwrap() - field.value_at(5)).abs() < 1e-12);
}

#[test]
fn fit_outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    demo_fit(&a, "gd", &[]);
    demo_fit(&b, "gd", &[]);
    for name in ["report.json", "field.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn even_extension_reflects_points() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(demo_fit(tmp.path(), "linear", &["--extend", "even"]).status.code(), Some(0));
    assert_eq!(read_report(tmp.path()).data_residuals.len(), 10);
}

#[test]
fn fit_exit_codes() {
    let tmp = TempDir::new().unwrap();
    run(&["fit", "--data", "/does/not/exist.csv", "--lambda", "1", "--out", s(tmp.path())], 1);
    run(&["fit", "--data", s(&data("demo_1d.csv")), "--lambda", "1", "--auto-lambda"], 1);
    run(&["fit", "--data", s(&data("demo_1d.csv"))], 1);
    run(&["fit", "--data", s(&data("demo_1d.csv")), "--lambda", "1", "--grid", "8,8"], 1);
    run(&["fit", "--data", s(&data("demo_1d.csv")), "--lambda", "1", "--scale", "3"], 1);
    // Running out of iterations and diverging are both numerical failures.
    assert_eq!(demo_fit(tmp.path(), "gd", &["--max-iters", "10"]).status.code(), Some(2));
    assert_eq!(demo_fit(tmp.path(), "gd", &["--delta", "10"]).status.code(), Some(2));
}

#[test]
fn auto_lambda_fit_uses_sweep_maximizer() {
    let tmp = TempDir::new().unwrap();
    let (fit, sweep) = (tmp.path().join("fit"), tmp.path().join("sweep"));
    let d = data("demo_1d.csv");
    run(&["fit", "--data", s(&d), "--k", "1", "--auto-lambda", "--out", s(&fit)], 0);
    run(&["sweep", "--data", s(&d), "--k", "1", "--out", s(&sweep)], 0);
    let selection: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sweep.join("selection.json")).unwrap()).unwrap();
    assert_eq!(read_report(&fit).lambda, selection["lambda0_sweep"].as_f64().unwrap());
}

#[test]
fn sweep_writes_monotone_lambda_column() {
    let tmp = TempDir::new().unwrap();
    run(
        &["sweep", "--data", s(&data("demo_1d.csv")), "--k", "1", "--lambda-range", "1e-6:1e2:17", "--out", s(tmp.path())],
        0,
    );
    let rows = read_sweep_csv(File::open(tmp.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 17);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(rows.iter().all(|r| r.1 >= 0.0));
}

#[test]
fn descent_lands_within_one_grid_spacing() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        &["sweep", "--data", s(&data("demo_1d.csv")), "--k", "1", "--method", "descent", "--out", s(tmp.path())],
        0,
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("sweep lambda0") && stdout.contains("descent lambda0"));
    let sel: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("selection.json")).unwrap()).unwrap();
    let (a, b) = (sel["lambda0_sweep"].as_f64().unwrap(), sel["descent"]["lambda0"].as_f64().unwrap());
    // Default grid: 25 points over 12 decades.
    let spacing = 12.0 * 10f64.ln() / 24.0;
    assert!((a / b).ln().abs() <= spacing, "{a:e} vs {b:e}");
    assert_eq!(sel["descent"]["converged"], true);
}

#[test]
fn empty_lambda_grid_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    run(&["sweep", "--data", s(&data("demo_1d.csv")), "--lambdas", "", "--out", s(tmp.path())], 1);
    run(&["sweep", "--data", s(&data("demo_1d.csv")), "--lambda-range", "1:1e-3:5", "--out", s(tmp.path())], 1);
}

#[test]
fn classify_iris_setosa() {
    let tmp = TempDir::new().unwrap();
    let iris = data("iris.csv");
    run(
        &[
            "classify", "--data", s(&iris), "--label-col", "species", "--positive-class", "setosa", "--lambda", "1e-4",
            "--out", s(tmp.path()),
        ],
        0,
    );
    let metrics: ClassificationMetrics =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.accuracy, 100.0);
    assert_eq!(metrics.metric, "training_accuracy");
    let profile = fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("coordinate,value\n"));
    assert_eq!(profile.lines().count(), 1 + 36);

    // The saved model scores the same data identically.
    let out = run(
        &[
            "evaluate", "--model", s(&tmp.path().join("model.json")), "--data", s(&iris), "--label-col", "species",
            "--positive-class", "setosa",
        ],
        0,
    );
    let again: ClassificationMetrics = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(again.true_positive, metrics.true_positive);
    assert_eq!(again.true_negative, metrics.true_negative);
}

#[test]
fn classify_xor_demo() {
    let tmp = TempDir::new().unwrap();
    run(
        &[
            "classify", "--data", s(&data("xor.csv")), "--positive-class", "same", "--lambda", "1e-6",
            "--quant-budget", "16", "--out", s(tmp.path()),
        ],
        0,
    );
    let metrics: ClassificationMetrics =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.accuracy, 100.0);
}

#[test]
fn classify_input_errors() {
    let tmp = TempDir::new().unwrap();
    let iris = data("iris.csv");
    let out = run(
        &["classify", "--data", s(&iris), "--label-col", "Species", "--positive-class", "setosa", "--lambda", "1"],
        1,
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("label column"));
    run(
        &[
            "classify", "--data", s(&iris), "--label-col", "species", "--positive-class", "rose", "--lambda", "1",
            "--out", s(tmp.path()),
        ],
        1,
    );
}
