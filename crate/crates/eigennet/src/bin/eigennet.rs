//! Command line for the eigennet crate: synthetic data generation, single
//! fits, prediction, cross-validation, experiment suites, and report
//! conversion.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use eigennet::baselines::{fit_bayesian_lasso, fit_elastic_logistic, fit_l1_logistic};
use eigennet::datagen::{
    generate_correlated, generate_independent, load_csv, save_csv, LabelColumn, LabelMap, SynthSpec,
};
use eigennet::eigen::eigendecompose;
use eigennet::experiments::{
    cross_validate, default_grid, emit_report, run_experiment, ExperimentConfig, ExperimentReport,
    FittedClassifier, GridPoint, Method, ReportFormat, Suite, FIT_MAX_ITER, FIT_TOL,
};
use eigennet::model::HyperParams;
use eigennet::sampler::{posterior_mean_classifier, run_chain, write_chain_dump, SamplerConfig};
use eigennet::Dataset;

#[derive(Parser)]
#[command(
    name = "eigennet",
    version,
    about = "Sparse Bayesian linear classification with eigenvector-aligned priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test pair as CSV files.
    Synth(SynthArgs),
    /// Train one method on a CSV dataset and save the model as JSON.
    Fit(FitArgs),
    /// Apply a saved model to a CSV dataset.
    Predict(PredictArgs),
    /// Grid-search one method's penalties by cross-validation.
    Cv(CvArgs),
    /// Run a built-in experiment suite.
    Experiment(ExperimentArgs),
    /// Re-emit a JSON results file as CSV or JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with feature columns and one label column.
    #[arg(long)]
    data: PathBuf,
    /// Label column name (requires a header row).
    #[arg(long, default_value = "y")]
    label_column: String,
    /// Zero-based label column index; overrides --label-column and works
    /// without a header.
    #[arg(long)]
    label_index: Option<usize>,
    /// Label translations like "spam=1,ham=-1"; numeric +1/-1 otherwise.
    #[arg(long)]
    label_map: Option<String>,
}

impl DataArgs {
    fn label_column(&self) -> LabelColumn {
        match self.label_index {
            Some(idx) => LabelColumn::Index(idx),
            None => LabelColumn::Name(self.label_column.clone()),
        }
    }

    fn label_map(&self) -> anyhow::Result<LabelMap> {
        match &self.label_map {
            None => Ok(LabelMap::Numeric),
            Some(raw) => {
                let mut pairs = Vec::new();
                for part in raw.split(',') {
                    let (key, value) = part
                        .split_once('=')
                        .with_context(|| format!("label mapping {part:?} is not key=value"))?;
                    let value: f64 = value
                        .trim()
                        .parse()
                        .with_context(|| format!("label target {value:?} is not a number"))?;
                    pairs.push((key.trim().to_string(), value));
                }
                Ok(LabelMap::table(pairs)?)
            }
        }
    }

    fn load(&self) -> anyhow::Result<Dataset> {
        let data = load_csv(&self.data, &self.label_column(), &self.label_map()?)
            .with_context(|| format!("failed to load {}", self.data.display()))?;
        Ok(data)
    }
}

#[derive(Args)]
struct SamplerArgs {
    /// Total sampler iterations (default 30000, or 300000 with --full-scale).
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in iterations (default: half the total).
    #[arg(long)]
    burn_in: Option<usize>,
    /// Run the full-length sampler (300k iterations, 150k burn-in).
    #[arg(long)]
    full_scale: bool,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        let mut cfg = if self.full_scale {
            SamplerConfig::default()
        } else {
            SamplerConfig::desk_scale()
        };
        if let Some(iters) = self.iters {
            cfg.total_iterations = iters;
            cfg.burn_in = iters / 2;
        }
        if let Some(burn_in) = self.burn_in {
            cfg.burn_in = burn_in;
        }
        cfg.with_seed(seed)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 80)]
    n_train: usize,
    #[arg(long, default_value_t = 2000)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample features independently instead of group-correlated.
    #[arg(long)]
    independent: bool,
    /// Draw group weights with random magnitudes and a shared sign.
    #[arg(long)]
    random_weights: bool,
    /// Label by the margin's sign instead of a logistic draw.
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
    /// Also write the generating weights and intercept as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One of: lasso, enet, blasso, eigennet.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda3: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Where to write the fitted model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Write retained sampler states here (blasso and eigennet only).
    #[arg(long)]
    chain_dump: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON produced by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Where to write one prediction per row; omit to only print the error.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One of: lasso, enet, blasso, eigennet.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Output format for the validation table.
    #[arg(long, value_parser = parse_format, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct ExperimentArgs {
    /// One of: visualization, synth-correlated-sweep,
    /// synth-independent-sweep, csv.
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Directory for results and artifacts.
    #[arg(long, default_value = "eigennet-results")]
    out_dir: PathBuf,
    /// Input file for the csv suite.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Training rows per split in the csv suite.
    #[arg(long, default_value_t = 37)]
    n_train: usize,
    /// Label column name in the csv suite input.
    #[arg(long, default_value = "y")]
    label_column: String,
    /// Zero-based label column index; overrides --label-column.
    #[arg(long)]
    label_index: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// A results.json written by `experiment`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_format)]
    format: ReportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: eigennet::Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: eigennet::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: eigennet::Error| e.to_string())
}

/// A fitted classifier on disk: enough to predict, plus the penalties that
/// produced it.
#[derive(Serialize, Deserialize)]
struct ModelRecord {
    method: String,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    w: Vec<f64>,
    b: f64,
    /// Feature shift applied before the dot product.
    center: Vec<f64>,
}

impl ModelRecord {
    fn classifier(&self) -> FittedClassifier {
        FittedClassifier {
            w: DVector::from_vec(self.w.clone()),
            b: self.b,
            center: DVector::from_vec(self.center.clone()),
        }
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Fit(args) => fit(args),
        Command::Predict(args) => predict(args),
        Command::Cv(args) => cv(args),
        Command::Experiment(args) => experiment(args),
        Command::Report(args) => report(args),
    }
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut spec = if args.random_weights {
        SynthSpec::two_group_random_weights(args.n_train)
    } else {
        SynthSpec::two_group_default(args.n_train)
    };
    spec.n_test = args.n_test;
    spec.noiseless_labels = args.noiseless;
    let sample = if args.independent {
        generate_independent(&spec, args.seed)?
    } else {
        generate_correlated(&spec, args.seed)?
    };
    save_csv(&sample.train, &args.out_train)?;
    save_csv(&sample.test, &args.out_test)?;
    if let Some(path) = &args.truth {
        let truth = serde_json::json!({
            "w": sample.truth.w.iter().copied().collect::<Vec<f64>>(),
            "b": sample.truth.b,
        });
        std::fs::write(path, serde_json::to_string_pretty(&truth)?)?;
    }
    let (pos, neg) = sample.train.class_counts();
    println!(
        "wrote {} train rows ({pos} positive, {neg} negative) and {} test rows, p = {}",
        sample.train.n(),
        sample.test.n(),
        sample.train.p()
    );
    Ok(())
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let cfg = args.sampler.config(args.seed);
    let point = GridPoint {
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        lambda3: args.lambda3,
    };
    if args.chain_dump.is_some() && !matches!(args.method, Method::BayesianLasso | Method::EigenNet)
    {
        bail!("--chain-dump only applies to blasso and eigennet");
    }

    let (w, b, center) = match args.method {
        Method::Lasso => {
            let fit = fit_l1_logistic(&data, point.lambda1, FIT_TOL, FIT_MAX_ITER)?;
            if !fit.converged {
                eprintln!("warning: stopped at the iteration cap before reaching tolerance");
            }
            (fit.w, fit.b, DVector::zeros(data.p()))
        }
        Method::ElasticNet => {
            let fit =
                fit_elastic_logistic(&data, point.lambda1, point.lambda2, FIT_TOL, FIT_MAX_ITER)?;
            if !fit.converged {
                eprintln!("warning: stopped at the iteration cap before reaching tolerance");
            }
            (fit.w, fit.b, DVector::zeros(data.p()))
        }
        Method::BayesianLasso => {
            let fit = fit_bayesian_lasso(&data, point.lambda1, &cfg)?;
            print_chain_summary(&fit.chain.accept_rates, fit.chain.samples.len());
            if let Some(path) = &args.chain_dump {
                write_chain_dump(&fit.chain, std::fs::File::create(path)?)?;
            }
            (fit.w, fit.b, DVector::zeros(data.p()))
        }
        Method::EigenNet => {
            let basis = eigendecompose(&data)?;
            let hp = HyperParams::new(point.lambda1, point.lambda2, point.lambda3)?;
            let chain = run_chain(&data, &basis, &hp, &cfg)?;
            print_chain_summary(&chain.accept_rates, chain.samples.len());
            if let Some(path) = &args.chain_dump {
                write_chain_dump(&chain, std::fs::File::create(path)?)?;
            }
            let (w, b) = posterior_mean_classifier(&chain, &basis)?;
            (w, b, basis.mean().clone())
        }
    };

    let record = ModelRecord {
        method: args.method.name().into(),
        lambda1: point.lambda1,
        lambda2: point.lambda2,
        lambda3: point.lambda3,
        w: w.iter().copied().collect(),
        b,
        center: center.iter().copied().collect(),
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&record)?)?;
    let nonzero = w.iter().filter(|v| v.abs() > 1e-8).count();
    println!(
        "fit {} on {} rows: {nonzero}/{} weights above 1e-8, b = {b:.6}; model saved to {}",
        args.method,
        data.n(),
        data.p(),
        args.out.display()
    );
    Ok(())
}

fn print_chain_summary(rates: &eigennet::sampler::AcceptRates, retained: usize) {
    println!(
        "chain: {retained} retained samples, acceptance alpha {:.3} beta {:.3} s {:.3} bias {:.3}",
        rates.alpha, rates.beta, rates.s, rates.bias
    );
}

fn predict(args: PredictArgs) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let record: ModelRecord = serde_json::from_str(
        &std::fs::read_to_string(&args.model)
            .with_context(|| format!("failed to read {}", args.model.display()))?,
    )?;
    let classifier = record.classifier();
    let predictions = classifier.predict(data.features())?;
    if let Some(path) = &args.out {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "prediction")?;
        for value in predictions.iter() {
            writeln!(out, "{}", if *value > 0.0 { 1 } else { -1 })?;
        }
    }
    let error = eigennet::model::error_rate(&predictions, data.labels())?;
    println!(
        "{} predictions from the {} model, error rate {error:.6}",
        predictions.len(),
        record.method
    );
    Ok(())
}

fn cv(args: CvArgs) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let cfg = args.sampler.config(args.seed);
    let grid = default_grid(args.method);
    let report = cross_validate(&data, args.method, &grid, args.folds, args.seed, &cfg)?;

    #[derive(Serialize)]
    struct CvRow {
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
        mean_error: f64,
    }
    let rows: Vec<CvRow> = report
        .table
        .iter()
        .map(|(point, err)| CvRow {
            lambda1: point.lambda1,
            lambda2: point.lambda2,
            lambda3: point.lambda3,
            mean_error: *err,
        })
        .collect();
    match args.format {
        ReportFormat::Csv => {
            println!("lambda1,lambda2,lambda3,mean_error");
            for row in &rows {
                println!(
                    "{},{},{},{}",
                    row.lambda1, row.lambda2, row.lambda3, row.mean_error
                );
            }
        }
        ReportFormat::Json => {
            let body = serde_json::json!({ "best": report.best, "table": rows });
            println!("{}", serde_json::to_string_pretty(&body)?);
        }
    }
    eprintln!(
        "selected lambda1 = {}, lambda2 = {}, lambda3 = {} ({} folds skipped)",
        report.best.lambda1, report.best.lambda2, report.best.lambda3, report.skipped_folds
    );
    Ok(())
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig {
        runs: args.runs,
        base_seed: args.seed,
        folds: args.folds,
        sampler: args.sampler.config(0),
        n_grid: None,
        out_dir: Some(args.out_dir.clone()),
        csv_path: args.csv.clone(),
        csv_label: match args.label_index {
            Some(idx) => LabelColumn::Index(idx),
            None => LabelColumn::Name(args.label_column.clone()),
        },
        csv_label_map: LabelMap::Numeric,
        csv_n_train: args.n_train,
    };
    let outcome = run_experiment(args.suite, &cfg)?;
    println!("method        dataset                n_train  mean_error  std_error");
    for report in &outcome.reports {
        println!(
            "{:<13} {:<22} {:>7}  {:>10.4}  {:>9.4}",
            report.method.name(),
            report.dataset_id,
            report.n_train,
            report.mean_error,
            report.std_error
        );
    }
    println!("results written to {}", args.out_dir.display());
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let reports: Vec<ExperimentReport> = serde_json::from_str(
        &std::fs::read_to_string(&args.input)
            .with_context(|| format!("failed to read {}", args.input.display()))?,
    )?;
    emit_report(&reports, args.format, &args.out)?;
    println!(
        "{} reports written to {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}
