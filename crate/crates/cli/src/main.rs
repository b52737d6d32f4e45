use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sobolev_fit::{
    bin_to_grid, default_lambda_grid, default_truncation, evaluate, even_extension, extract_line_profile,
    load_labeled_csv, log_space, select_lambda_descent, solve_gd, solve_kernel, solve_linear, sweep_lambda,
    train, train_auto, write_profile_csv, ClassifierModel, Dataset, DescentOptions, Error, ExtensionMode,
    ExtensionSpec, FrequencyWeight, GDParams, GridSpec, PeakLocation, ScaleMode,
};

#[derive(Parser)]
#[command(name = "sobfit", version, about = "Sobolev-regularized fitting on the periodic unit cube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a field to `x1,...,xm,a` data at one λ.
    Fit(FitArgs),
    /// Sweep λ and report the maximizer of the fitted L² norm.
    Sweep(SweepArgs),
    /// Train a one-vs-rest classifier on labeled feature data.
    Classify(ClassifyArgs),
    /// Score a saved classifier on labeled feature data.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    #[value(name = "2pi")]
    TwoPi,
    #[value(name = "1")]
    Unit,
}

impl From<Scale> for ScaleMode {
    fn from(s: Scale) -> Self {
        match s {
            Scale::TwoPi => ScaleMode::TwoPi,
            Scale::Unit => ScaleMode::Unit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Extend {
    None,
    Even,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Gd,
    Linear,
    Kernel,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sweep,
    Descent,
}

#[derive(Args)]
struct FieldArgs {
    /// Data CSV with header `x1,...,xm,a` and points in the open unit cube.
    #[arg(long)]
    data: PathBuf,
    /// Samples per axis, e.g. `64` or `32,16`. A single value is used on every axis.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    grid: Vec<usize>,
    /// Smoothness order.
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, value_enum, default_value = "2pi")]
    scale: Scale,
    /// Gradient-descent learning rate; defaults to half the stability bound.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 500_000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "none")]
    extend: Extend,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct LambdaGrid {
    /// Explicit λ grid, comma separated.
    #[arg(long, conflicts_with = "lambda_range")]
    lambdas: Option<String>,
    /// Log-spaced λ grid as `LO:HI:COUNT`.
    #[arg(long)]
    lambda_range: Option<String>,
}

impl LambdaGrid {
    fn resolve(&self, default: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>, Failure> {
        if let Some(list) = &self.lambdas {
            return list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| Failure::input(format!("bad λ value {s:?}"))))
                .collect();
        }
        if let Some(range) = &self.lambda_range {
            let parts: Vec<&str> = range.split(':').collect();
            let bad = || Failure::input(format!("--lambda-range expects LO:HI:COUNT, got {range:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo = parts[0].parse().map_err(|_| bad())?;
            let hi = parts[1].parse().map_err(|_| bad())?;
            let count = parts[2].parse().map_err(|_| bad())?;
            return Ok(log_space(lo, hi, count)?);
        }
        Ok(default())
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("reg").required(true).args(["lambda", "auto_lambda"]))]
struct FitArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    lambda: Option<f64>,
    /// Choose λ by a sweep before fitting.
    #[arg(long)]
    auto_lambda: bool,
    #[command(flatten)]
    grid: LambdaGrid,
    #[arg(long, value_enum, default_value = "linear")]
    solver: Solver,
    /// Kernel frequency-box radius; defaults to max(8, 4 × grid bandwidth).
    #[arg(long)]
    trunc: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[command(flatten)]
    grid: LambdaGrid,
    /// `descent` also runs the iterative selection and reports both λ₀.
    #[arg(long, value_enum, default_value = "sweep")]
    method: Method,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("reg").required(true).args(["lambda", "auto_lambda"]))]
struct ClassifyArgs {
    /// Labeled CSV: numeric feature columns plus one label column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long)]
    positive_class: String,
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    auto_lambda: bool,
    #[command(flatten)]
    grid: LambdaGrid,
    #[arg(long, value_enum, default_value = "2pi")]
    scale: Scale,
    /// Target number of grid cells.
    #[arg(long, default_value_t = 12_000)]
    quant_budget: usize,
    /// Axis of the emitted line profile.
    #[arg(long, default_value_t = 0)]
    profile_axis: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model JSON written by `classify`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long)]
    positive_class: String,
    /// Also write `metrics.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit 1 for bad input, 2 when the numerics did not converge.
#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(msg) | Failure::Numerical(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let numerical = match &e {
            Error::Divergence { .. } => true,
            Error::AtLambda { source, .. } => matches!(**source, Error::Divergence { .. }),
            _ => false,
        };
        if numerical {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Failure::Input(_) => 1,
                Failure::Numerical(_) => 2,
            })
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("FIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::input(format!("FIT_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::input(e.to_string()))
}

fn grid_for(samples: &[usize], m: usize) -> Result<GridSpec, Failure> {
    let samples = match samples.len() {
        1 => vec![samples[0]; m],
        n if n == m => samples.to_vec(),
        n => return Err(Failure::input(format!("--grid has {n} axes but the data has {m}"))),
    };
    Ok(GridSpec::new(samples)?)
}

fn load_field_data(a: &FieldArgs) -> Result<(Dataset, GridSpec), Failure> {
    let raw = Dataset::load_csv_path(&a.data, None)
        .map_err(|e| Failure::input(format!("{}: {e}", a.data.display())))?;
    let grid = grid_for(&a.grid, raw.dim())?;
    let data = match a.extend {
        Extend::None => raw,
        Extend::Even => even_extension(&raw, &ExtensionSpec::unit(ExtensionMode::EvenSymmetric, &grid))?,
    };
    log::info!("{} points, mean offset {}", data.len(), data.mean_offset());
    Ok((data, grid))
}

fn gd_params(a: &FieldArgs) -> GDParams {
    GDParams {
        learning_rate: a.delta,
        max_iters: a.max_iters,
        ..GDParams::default()
    }
}

fn sweep_default() -> Vec<f64> {
    log_space(1e-8, 1e4, 25).expect("valid default range")
}

fn out_dir(dir: &Path) -> Result<&Path, Failure> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Longest objective trace written to `report.json`.
const TRACE_POINTS: usize = 1000;

/// Evenly strided subsequence of at most `limit` entries that keeps the last one.
fn thin(trace: &[f64], limit: usize) -> Vec<f64> {
    if trace.len() <= limit {
        return trace.to_vec();
    }
    let stride = trace.len().div_ceil(limit - 1);
    let mut out: Vec<f64> = trace.iter().step_by(stride).copied().collect();
    out.push(trace[trace.len() - 1]);
    out
}

fn cmd_fit(a: &FitArgs) -> Result<bool, Failure> {
    let (data, grid) = load_field_data(&a.field)?;
    let out = out_dir(&a.field.out)?;
    let template = FrequencyWeight::new(a.field.k, 1.0, a.field.scale.into())?;
    let gridded = bin_to_grid(&data, &grid)?;
    let lambda = match a.lambda {
        Some(l) => l,
        None => {
            let sweep = sweep_lambda(&gridded, &template, &a.grid.resolve(sweep_default)?)?;
            log::info!("auto λ = {:e} ({:?})", sweep.lambda0, sweep.peak);
            sweep.lambda0
        }
    };
    let fw = template.with_lambda(lambda)?;
    let (field, mut report) = match a.solver {
        Solver::Gd => solve_gd(&gridded, &fw, &gd_params(&a.field))?,
        Solver::Linear => solve_linear(&gridded, &fw)?,
        Solver::Kernel => {
            let radius = a.trunc.unwrap_or_else(|| default_truncation(grid.bandwidth()));
            let model = solve_kernel(&data, &fw, radius)?;
            fs::write(out.join("kernel_model.json"), model.to_json()? + "\n")?;
            (model.predict_grid(&grid)?, model.report()?)
        }
    };
    report.objective_trace = thin(&report.objective_trace, TRACE_POINTS);
    write_json(&out.join("report.json"), &report)?;
    field.write_csv(File::create(out.join("field.csv"))?)?;
    println!(
        "lambda = {:e}, iterations = {}, objective = {:e}, l2_norm = {:e}, converged = {}",
        report.lambda, report.iterations, report.final_objective, report.l2_norm, report.converged
    );
    Ok(report.converged)
}

#[derive(Serialize)]
struct Selection {
    lambda0_sweep: f64,
    index0: usize,
    peak: PeakLocation,
    max_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    descent: Option<DescentSummary>,
}

#[derive(Serialize)]
struct DescentSummary {
    lambda0: f64,
    iterations: usize,
    converged: bool,
    endpoint_fallbacks: usize,
}

fn cmd_sweep(a: &SweepArgs) -> Result<bool, Failure> {
    let (data, grid) = load_field_data(&a.field)?;
    let out = out_dir(&a.field.out)?;
    let template = FrequencyWeight::new(a.field.k, 1.0, a.field.scale.into())?;
    let gridded = bin_to_grid(&data, &grid)?;
    let lambdas = a.grid.resolve(sweep_default)?;
    if lambdas.is_empty() {
        return Err(Failure::input("the λ grid is empty"));
    }
    let sweep = sweep_lambda(&gridded, &template, &lambdas)?;
    sweep.write_csv(File::create(out.join("sweep.csv"))?)?;
    sweep.field0.write_csv(File::create(out.join("field.csv"))?)?;
    println!("sweep lambda0 = {:e}", sweep.lambda0);

    let mut converged = true;
    let descent = match a.method {
        Method::Sweep => None,
        Method::Descent => {
            let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = lambdas.iter().cloned().fold(0.0, f64::max);
            let options = DescentOptions {
                lambda_init: (lo * hi).sqrt(),
                bracket: (lo, hi),
                ..DescentOptions::default()
            };
            let (lambda0, _, state) = select_lambda_descent(&gridded, &template, &gd_params(&a.field), &options)?;
            println!("descent lambda0 = {lambda0:e}");
            converged = state.converged;
            Some(DescentSummary {
                lambda0,
                iterations: state.iterations,
                converged: state.converged,
                endpoint_fallbacks: state.endpoint_fallbacks,
            })
        }
    };
    let selection = Selection {
        lambda0_sweep: sweep.lambda0,
        index0: sweep.index0,
        peak: sweep.peak,
        max_norm: sweep.max_norm(),
        descent,
    };
    write_json(&out.join("selection.json"), &selection)?;
    Ok(converged)
}

fn cmd_classify(a: &ClassifyArgs) -> Result<bool, Failure> {
    let file = File::open(&a.data).map_err(|e| Failure::input(format!("{}: {e}", a.data.display())))?;
    let labeled = load_labeled_csv(file, &a.label_col, &a.positive_class)?;
    let out = out_dir(&a.out)?;
    let template = FrequencyWeight::new(a.k, a.lambda.unwrap_or(1.0), a.scale.into())?;
    let model = if a.auto_lambda {
        let lambdas = a.grid.resolve(default_lambda_grid)?;
        let (model, sweep) = train_auto(&labeled.features, &labeled.labels, &template, a.quant_budget, &lambdas)?;
        sweep.write_csv(File::create(out.join("sweep.csv"))?)?;
        model
    } else {
        train(&labeled.features, &labeled.labels, &template, a.quant_budget)?
    };
    let metrics = evaluate(&model, &labeled.features, &labeled.labels, "training_accuracy")?;

    // The profile runs through the cell where the field peaks.
    let values = model.field.values();
    let peak = (0..values.len()).fold(0, |best, i| if values[i] > values[best] { i } else { best });
    let anchor = model.grid.multi_index(peak);
    let profile = extract_line_profile(&model, a.profile_axis, &anchor)?;

    fs::write(out.join("model.json"), model.to_json()? + "\n")?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write_profile_csv(&profile, File::create(out.join("profile.csv"))?)?;
    println!(
        "lambda = {:e}, grid = {:?}, training accuracy = {}%",
        model.weight.lambda,
        model.grid.samples(),
        metrics.accuracy
    );
    Ok(true)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<bool, Failure> {
    let text = fs::read_to_string(&a.model).map_err(|e| Failure::input(format!("{}: {e}", a.model.display())))?;
    let model = ClassifierModel::from_json(&text)?;
    let file = File::open(&a.data).map_err(|e| Failure::input(format!("{}: {e}", a.data.display())))?;
    let labeled = load_labeled_csv(file, &a.label_col, &a.positive_class)?;
    let metrics = evaluate(&model, &labeled.features, &labeled.labels, "accuracy")?;
    if let Some(dir) = &a.out {
        write_json(&out_dir(dir)?.join("metrics.json"), &metrics)?;
    }
    println!("{}", serde_json::to_string_pretty(&metrics).map_err(|e| Failure::input(e.to_string()))?);
    Ok(true)
}
