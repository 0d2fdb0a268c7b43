//! Experiment harness: cross-validated method comparison on synthetic and
//! CSV datasets, with machine-readable reports.
//!
//! Four classifiers share one pipeline: l1 logistic regression, elastic-net
//! logistic regression, the Bayesian lasso, and the eigenbasis model. Each
//! suite draws datasets, tunes every method by stratified k-fold
//! cross-validation over a fixed grid, refits on the full training set, and
//! scores held-out error. Reports carry per-run results plus a full echo of
//! the configuration so any number can be reproduced from the file alone.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_bayesian_lasso, fit_elastic_logistic, fit_l1_logistic};
use crate::data::Dataset;
use crate::datagen::{
    generate_correlated, generate_independent, load_csv, split, LabelColumn, LabelMap, SynthSpec,
};
use crate::eigen::{eigendecompose, to_weight_space};
use crate::error::{Error, Result};
use crate::model::HyperParams;
use crate::sampler::{posterior_mean_classifier, run_chain, SamplerConfig};

/// Convergence tolerance for the proximal-gradient baseline fits.
pub const FIT_TOL: f64 = 1e-6;
/// Iteration cap for the proximal-gradient baseline fits.
pub const FIT_MAX_ITER: usize = 20_000;
/// The per-penalty grid every method's cross-validation draws from.
pub const LAMBDA_LADDER: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// The four classifiers the harness compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "lasso")]
    Lasso,
    #[serde(rename = "enet")]
    ElasticNet,
    #[serde(rename = "blasso")]
    BayesianLasso,
    #[serde(rename = "eigennet")]
    EigenNet,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Lasso,
        Method::ElasticNet,
        Method::BayesianLasso,
        Method::EigenNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::ElasticNet => "enet",
            Method::BayesianLasso => "blasso",
            Method::EigenNet => "eigennet",
        }
    }

    fn ordinal(self) -> usize {
        match self {
            Method::Lasso => 0,
            Method::ElasticNet => 1,
            Method::BayesianLasso => 2,
            Method::EigenNet => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "enet" => Ok(Method::ElasticNet),
            "blasso" => Ok(Method::BayesianLasso),
            "eigennet" => Ok(Method::EigenNet),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; valid methods: lasso, enet, blasso, eigennet"
            ))),
        }
    }
}

/// One candidate penalty setting. Entries a method does not use stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

/// The cross-validation grid for `method`: every combination of the
/// [`LAMBDA_LADDER`] over the penalties the method actually has.
pub fn default_grid(method: Method) -> Vec<GridPoint> {
    let ladder = LAMBDA_LADDER;
    let mut grid = Vec::new();
    match method {
        Method::Lasso | Method::BayesianLasso => {
            for &l1 in &ladder {
                grid.push(GridPoint {
                    lambda1: l1,
                    lambda2: 0.0,
                    lambda3: 0.0,
                });
            }
        }
        Method::ElasticNet => {
            for &l1 in &ladder {
                for &l2 in &ladder {
                    grid.push(GridPoint {
                        lambda1: l1,
                        lambda2: l2,
                        lambda3: 0.0,
                    });
                }
            }
        }
        Method::EigenNet => {
            for &l1 in &ladder {
                for &l2 in &ladder {
                    for &l3 in &ladder {
                        grid.push(GridPoint {
                            lambda1: l1,
                            lambda2: l2,
                            lambda3: l3,
                        });
                    }
                }
            }
        }
    }
    grid
}

/// The grid point with the largest `lambda1`, then `lambda2`, then
/// `lambda3`; the fallback when cross-validation cannot run.
pub fn most_regularized(grid: &[GridPoint]) -> Option<GridPoint> {
    grid.iter().copied().max_by(|a, b| {
        a.lambda1
            .total_cmp(&b.lambda1)
            .then(a.lambda2.total_cmp(&b.lambda2))
            .then(a.lambda3.total_cmp(&b.lambda3))
    })
}

/// Mixes `parts` into one seed so nested experiment loops get independent,
/// reproducible RNG streams.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15;
    for &part in parts {
        state = splitmix64(state ^ splitmix64(part));
    }
    splitmix64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A trained classifier in feature space: predicts by
/// `sign((x - center) . w + b)` with ties going to +1.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedClassifier {
    pub w: DVector<f64>,
    pub b: f64,
    /// Per-feature shift applied before the dot product; zero for the
    /// baselines, the training mean for the eigenbasis model.
    pub center: DVector<f64>,
}

impl FittedClassifier {
    pub fn predict(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        if features.ncols() != self.w.len() {
            return Err(Error::Dimension(format!(
                "{} feature columns for a classifier over {}",
                features.ncols(),
                self.w.len()
            )));
        }
        let shift = self.center.dot(&self.w);
        let margins = features * &self.w;
        Ok(DVector::from_iterator(
            features.nrows(),
            margins
                .iter()
                .map(|m| if m - shift + self.b >= 0.0 { 1.0 } else { -1.0 }),
        ))
    }

    pub fn error_on(&self, data: &Dataset) -> Result<f64> {
        let predicted = self.predict(data.features())?;
        crate::model::error_rate(&predicted, data.labels())
    }
}

/// A fit plus, for the sampling methods, the retained weight-space draws.
#[derive(Debug, Clone)]
pub struct MethodFit {
    pub classifier: FittedClassifier,
    pub weight_samples: Option<Vec<DVector<f64>>>,
}

/// Trains `method` on `train` at the penalties in `point`. Sampling methods
/// run one chain seeded by `seed`; the convex baselines ignore it.
pub fn fit_method(
    method: Method,
    train: &Dataset,
    point: GridPoint,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<MethodFit> {
    let zero_center = DVector::zeros(train.p());
    match method {
        Method::Lasso => {
            let fit = fit_l1_logistic(train, point.lambda1, FIT_TOL, FIT_MAX_ITER)?;
            Ok(MethodFit {
                classifier: FittedClassifier {
                    w: fit.w,
                    b: fit.b,
                    center: zero_center,
                },
                weight_samples: None,
            })
        }
        Method::ElasticNet => {
            let fit =
                fit_elastic_logistic(train, point.lambda1, point.lambda2, FIT_TOL, FIT_MAX_ITER)?;
            Ok(MethodFit {
                classifier: FittedClassifier {
                    w: fit.w,
                    b: fit.b,
                    center: zero_center,
                },
                weight_samples: None,
            })
        }
        Method::BayesianLasso => {
            let fit = fit_bayesian_lasso(train, point.lambda1, &sampler.clone().with_seed(seed))?;
            let samples = fit
                .chain
                .samples
                .iter()
                .map(|s| s.state.alpha.clone())
                .collect();
            Ok(MethodFit {
                classifier: FittedClassifier {
                    w: fit.w,
                    b: fit.b,
                    center: zero_center,
                },
                weight_samples: Some(samples),
            })
        }
        Method::EigenNet => {
            let basis = eigendecompose(train)?;
            let hp = HyperParams::new(point.lambda1, point.lambda2, point.lambda3)?;
            let chain = run_chain(train, &basis, &hp, &sampler.clone().with_seed(seed))?;
            let (w, b) = posterior_mean_classifier(&chain, &basis)?;
            let samples = chain
                .samples
                .iter()
                .map(|s| to_weight_space(&s.state.alpha, &basis))
                .collect::<Result<Vec<_>>>()?;
            Ok(MethodFit {
                classifier: FittedClassifier {
                    w,
                    b,
                    center: basis.mean().clone(),
                },
                weight_samples: Some(samples),
            })
        }
    }
}

/// Outcome of a grid search: the winner, the mean validation error per grid
/// point, and how many folds were dropped.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub best: GridPoint,
    pub table: Vec<(GridPoint, f64)>,
    pub skipped_folds: usize,
}

/// Stratified k-fold cross-validation of `method` over `grid`.
///
/// Folds are fixed once from `seed` and shared by every grid point. A fold
/// whose training part is single-class (or whose validation part is empty)
/// is skipped with a warning; if no fold survives the search fails. Ties on
/// mean validation error prefer larger `lambda1`, then `lambda2`, then
/// `lambda3`. A single-point grid returns immediately.
pub fn cross_validate(
    data: &Dataset,
    method: Method,
    grid: &[GridPoint],
    folds: usize,
    seed: u64,
    sampler: &SamplerConfig,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::Config("cross-validation grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if let [only] = grid {
        return Ok(CvReport {
            best: *only,
            table: Vec::new(),
            skipped_folds: 0,
        });
    }

    let assignment = stratified_assignment(data.labels(), folds, seed);
    let mut usable = Vec::new();
    let mut skipped_folds = 0;
    for fold in 0..folds {
        let validation: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] == fold).collect();
        let training: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] != fold).collect();
        let classes = training
            .iter()
            .map(|&i| data.labels()[i])
            .fold((false, false), |(pos, neg), y| {
                (pos || y > 0.0, neg || y < 0.0)
            });
        if validation.is_empty() || !(classes.0 && classes.1) {
            eprintln!("warning: cross-validation fold {fold} skipped (single-class or empty)");
            skipped_folds += 1;
            continue;
        }
        usable.push((
            data.select_rows(&training)?,
            data.select_rows(&validation)?,
            fold,
        ));
    }
    if usable.is_empty() {
        return Err(Error::CrossValidation(format!(
            "all {folds} folds were skipped; the data cannot support stratified validation"
        )));
    }

    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(GridPoint, f64)> = None;
    for &point in grid {
        let mut total = 0.0;
        for (train_part, val_part, fold) in &usable {
            let fit = fit_method(
                method,
                train_part,
                point,
                sampler,
                derive_seed(&[seed, *fold as u64]),
            )?;
            total += fit.classifier.error_on(val_part)?;
        }
        let mean = total / usable.len() as f64;
        table.push((point, mean));
        let better = match &best {
            None => true,
            Some((incumbent, incumbent_err)) => ordered_key(
                &preference_key(point, mean),
                &preference_key(*incumbent, *incumbent_err),
            )
            .is_lt(),
        };
        if better {
            best = Some((point, mean));
        }
    }
    Ok(CvReport {
        best: best.expect("non-empty grid was searched").0,
        table,
        skipped_folds,
    })
}

fn preference_key(point: GridPoint, error: f64) -> [f64; 4] {
    [error, -point.lambda1, -point.lambda2, -point.lambda3]
}

fn ordered_key(a: &[f64; 4], b: &[f64; 4]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| !o.is_eq())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Assigns each row to a fold, shuffling within each class so every fold
/// gets a proportional share of both labels.
fn stratified_assignment(labels: &DVector<f64>, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class_sign in [1.0, -1.0] {
        let mut members: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] == class_sign)
            .collect();
        members.shuffle(&mut rng);
        for (k, &row) in members.iter().enumerate() {
            assignment[row] = k % folds;
        }
    }
    assignment
}

/// The built-in experiment suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// One fixed-weight correlated problem, 80 training rows: error rates
    /// plus weight vectors and posterior covariance matrices.
    Visualization,
    /// Correlated features, training size swept from 10 to 80.
    SynthCorrelatedSweep,
    /// Independent features, training size swept from 10 to 80.
    SynthIndependentSweep,
    /// Repeated random splits of a CSV file.
    Csv,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Visualization => "visualization",
            Suite::SynthCorrelatedSweep => "synth-correlated-sweep",
            Suite::SynthIndependentSweep => "synth-independent-sweep",
            Suite::Csv => "csv",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Suite::Visualization => 1,
            Suite::SynthCorrelatedSweep => 2,
            Suite::SynthIndependentSweep => 3,
            Suite::Csv => 4,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visualization" => Ok(Suite::Visualization),
            "synth-correlated-sweep" => Ok(Suite::SynthCorrelatedSweep),
            "synth-independent-sweep" => Ok(Suite::SynthIndependentSweep),
            "csv" => Ok(Suite::Csv),
            other => Err(Error::Config(format!(
                "unknown suite {other:?}; valid suites: visualization, \
                 synth-correlated-sweep, synth-independent-sweep, csv"
            ))),
        }
    }
}

/// Everything an experiment run can be told; [`Default`] gives the standard
/// protocol (10 runs, 5 folds, desk-scale sampler).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub folds: usize,
    pub sampler: SamplerConfig,
    /// Training sizes for the sweep suites; `None` means 10 to 80 by 10.
    pub n_grid: Option<Vec<usize>>,
    /// Where to write reports and visualization artifacts; `None` keeps
    /// everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Input file for the csv suite.
    pub csv_path: Option<PathBuf>,
    pub csv_label: LabelColumn,
    pub csv_label_map: LabelMap,
    /// Training rows per split in the csv suite.
    pub csv_n_train: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            base_seed: 0,
            folds: 5,
            sampler: SamplerConfig::desk_scale(),
            n_grid: None,
            out_dir: None,
            csv_path: None,
            csv_label: LabelColumn::Name("y".into()),
            csv_label_map: LabelMap::Numeric,
            csv_n_train: 37,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("need at least one run".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() || grid.contains(&0) {
                return Err(Error::Config("n_grid must list positive sizes".into()));
            }
        }
        self.sampler.validate()
    }

    fn echo(&self, suite: Suite, n_test: Option<usize>) -> ConfigEcho {
        ConfigEcho {
            suite: suite.name().into(),
            runs: self.runs,
            base_seed: self.base_seed,
            folds: self.folds,
            sampler: self.sampler.clone(),
            lambda_ladder: LAMBDA_LADDER.to_vec(),
            fit_tol: FIT_TOL,
            fit_max_iter: FIT_MAX_ITER,
            n_test,
            csv_n_train: (suite == Suite::Csv).then_some(self.csv_n_train),
        }
    }
}

/// Verbatim copy of every knob that shaped a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub suite: String,
    pub runs: usize,
    pub base_seed: u64,
    pub folds: usize,
    pub sampler: SamplerConfig,
    pub lambda_ladder: Vec<f64>,
    pub fit_tol: f64,
    pub fit_max_iter: usize,
    pub n_test: Option<usize>,
    pub csv_n_train: Option<usize>,
}

/// One (dataset, method) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub error_rate: f64,
    pub wall_time_s: f64,
    /// The penalties cross-validation selected for this run.
    pub selected: GridPoint,
}

/// All runs of one method on one dataset family, with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub dataset_id: String,
    pub n_train: usize,
    pub per_run: Vec<RunResult>,
    pub mean_error: f64,
    /// Sample standard deviation of the error rates divided by the square
    /// root of the run count; zero for a single run.
    pub std_error: f64,
    pub config: ConfigEcho,
}

impl ExperimentReport {
    fn summarize(
        method: Method,
        dataset_id: &str,
        n_train: usize,
        per_run: Vec<RunResult>,
        config: ConfigEcho,
    ) -> Result<Self> {
        if per_run.is_empty() {
            return Err(Error::Contract("report needs at least one run".into()));
        }
        let n = per_run.len() as f64;
        let mean_error = per_run.iter().map(|r| r.error_rate).sum::<f64>() / n;
        let std_error = if per_run.len() < 2 {
            0.0
        } else {
            let var = per_run
                .iter()
                .map(|r| (r.error_rate - mean_error).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        };
        Ok(Self {
            method,
            dataset_id: dataset_id.into(),
            n_train,
            per_run,
            mean_error,
            std_error,
            config,
        })
    }
}

/// Weight vectors and posterior covariance matrices from the visualization
/// suite: the truth and first-run fit per method, plus the seed-averaged
/// posterior covariance of the two sampling methods.
#[derive(Debug, Clone)]
pub struct VisualizationArtifacts {
    pub truth: DVector<f64>,
    pub weights: Vec<(Method, DVector<f64>)>,
    pub cov_blasso: DMatrix<f64>,
    pub cov_eigennet: DMatrix<f64>,
}

/// Reports plus any suite-specific artifacts.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub reports: Vec<ExperimentReport>,
    pub visualization: Option<VisualizationArtifacts>,
}

/// Runs one suite end to end. When `cfg.out_dir` is set the reports land
/// there as `results.csv` and `results.json`, and the visualization suite
/// adds `weights.csv`, `cov_blasso.csv`, and `cov_eigennet.csv`.
pub fn run_experiment(suite: Suite, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let outcome = match suite {
        Suite::Visualization => visualization_suite(cfg)?,
        Suite::SynthCorrelatedSweep => sweep_suite(cfg, Suite::SynthCorrelatedSweep)?,
        Suite::SynthIndependentSweep => sweep_suite(cfg, Suite::SynthIndependentSweep)?,
        Suite::Csv => csv_suite(cfg)?,
    };
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        emit_report(&outcome.reports, ReportFormat::Csv, dir.join("results.csv"))?;
        emit_report(
            &outcome.reports,
            ReportFormat::Json,
            dir.join("results.json"),
        )?;
        if let Some(art) = &outcome.visualization {
            write_weight_table(art, dir.join("weights.csv"))?;
            write_matrix_csv(&art.cov_blasso, dir.join("cov_blasso.csv"))?;
            write_matrix_csv(&art.cov_eigennet, dir.join("cov_eigennet.csv"))?;
        }
    }
    Ok(outcome)
}

/// Cross-validates, refits, and scores one method on one train/test pair,
/// timing the whole pipeline. Falls back to the most regularized grid point
/// when no fold supports validation.
fn run_cell(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    cfg: &ExperimentConfig,
    data_seed: u64,
    context: &str,
) -> Result<(RunResult, MethodFit)> {
    let grid = default_grid(method);
    let started = Instant::now();
    let cv_seed = derive_seed(&[data_seed, method.ordinal() as u64, 1]);
    let selected = match cross_validate(train, method, &grid, cfg.folds, cv_seed, &cfg.sampler) {
        Ok(report) => report.best,
        Err(Error::CrossValidation(msg)) => {
            eprintln!(
                "warning: {context} {method}: {msg}; falling back to the most regularized point"
            );
            most_regularized(&grid).expect("default grids are non-empty")
        }
        Err(e) => return Err(e),
    };
    let fit_seed = derive_seed(&[data_seed, method.ordinal() as u64, 2]);
    let fit = fit_method(method, train, selected, &cfg.sampler, fit_seed)?;
    let error_rate = fit.classifier.error_on(test)?;
    Ok((
        RunResult {
            seed: data_seed,
            error_rate,
            wall_time_s: started.elapsed().as_secs_f64(),
            selected,
        },
        fit,
    ))
}

fn visualization_suite(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let spec = SynthSpec::two_group_default(80);
    let echo = cfg.echo(Suite::Visualization, Some(spec.n_test));
    let p = spec.p;
    let mut per_method: Vec<Vec<RunResult>> = vec![Vec::new(); Method::ALL.len()];
    let mut weights: Vec<(Method, DVector<f64>)> = Vec::new();
    let mut truth = DVector::zeros(p);
    let mut cov_blasso = DMatrix::zeros(p, p);
    let mut cov_eigennet = DMatrix::zeros(p, p);

    for run in 0..cfg.runs {
        let data_seed = derive_seed(&[cfg.base_seed, Suite::Visualization.tag(), run as u64]);
        let sample = generate_correlated(&spec, data_seed)?;
        if run == 0 {
            truth = sample.truth.w.clone();
        }
        for method in Method::ALL {
            let context = format!("visualization run {run}");
            let (result, fit) = run_cell(
                method,
                &sample.train,
                &sample.test,
                cfg,
                data_seed,
                &context,
            )?;
            per_method[method.ordinal()].push(result);
            if run == 0 {
                weights.push((method, fit.classifier.w.clone()));
            }
            if let Some(samples) = &fit.weight_samples {
                let cov = covariance_of(samples)?;
                match method {
                    Method::BayesianLasso => cov_blasso += cov,
                    Method::EigenNet => cov_eigennet += cov,
                    _ => {}
                }
            }
        }
    }

    let scale = 1.0 / cfg.runs as f64;
    let reports = Method::ALL
        .iter()
        .map(|&method| {
            ExperimentReport::summarize(
                method,
                "visualization",
                spec.n_train,
                per_method[method.ordinal()].clone(),
                echo.clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome {
        reports,
        visualization: Some(VisualizationArtifacts {
            truth,
            weights,
            cov_blasso: cov_blasso * scale,
            cov_eigennet: cov_eigennet * scale,
        }),
    })
}

fn sweep_suite(cfg: &ExperimentConfig, suite: Suite) -> Result<ExperimentOutcome> {
    let n_grid = cfg
        .n_grid
        .clone()
        .unwrap_or_else(|| (1..=8).map(|k| k * 10).collect());
    let dataset_id = match suite {
        Suite::SynthCorrelatedSweep => "synth-correlated",
        _ => "synth-independent",
    };
    let echo = cfg.echo(suite, Some(2000));

    let mut cells: Vec<Vec<Vec<RunResult>>> =
        vec![vec![Vec::new(); Method::ALL.len()]; n_grid.len()];
    for (ni, &n) in n_grid.iter().enumerate() {
        let spec = SynthSpec::two_group_random_weights(n);
        for run in 0..cfg.runs {
            let data_seed = derive_seed(&[cfg.base_seed, suite.tag(), n as u64, run as u64]);
            let sample = match suite {
                Suite::SynthCorrelatedSweep => generate_correlated(&spec, data_seed)?,
                _ => generate_independent(&spec, data_seed)?,
            };
            for method in Method::ALL {
                let context = format!("{dataset_id} n={n} run {run}");
                let (result, _) = run_cell(
                    method,
                    &sample.train,
                    &sample.test,
                    cfg,
                    data_seed,
                    &context,
                )?;
                cells[ni][method.ordinal()].push(result);
            }
        }
    }

    let mut reports = Vec::with_capacity(Method::ALL.len() * n_grid.len());
    for method in Method::ALL {
        for (ni, &n) in n_grid.iter().enumerate() {
            reports.push(ExperimentReport::summarize(
                method,
                dataset_id,
                n,
                cells[ni][method.ordinal()].clone(),
                echo.clone(),
            )?);
        }
    }
    Ok(ExperimentOutcome {
        reports,
        visualization: None,
    })
}

fn csv_suite(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let path = cfg
        .csv_path
        .as_ref()
        .ok_or_else(|| Error::Config("the csv suite needs an input file".into()))?;
    let data = load_csv(path, &cfg.csv_label, &cfg.csv_label_map)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let reports = split_suite_reports(&data, &format!("csv:{name}"), cfg)?;
    Ok(ExperimentOutcome {
        reports,
        visualization: None,
    })
}

/// The csv suite's pipeline on an already-loaded dataset: repeated seeded
/// splits, cross-validated fits, one report per method.
pub fn split_suite_reports(
    data: &Dataset,
    dataset_id: &str,
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentReport>> {
    cfg.validate()?;
    if cfg.csv_n_train == 0 || cfg.csv_n_train >= data.n() {
        return Err(Error::Config(format!(
            "csv_n_train must be in [1, {}), got {}",
            data.n(),
            cfg.csv_n_train
        )));
    }
    let echo = cfg.echo(Suite::Csv, None);
    let mut per_method: Vec<Vec<RunResult>> = vec![Vec::new(); Method::ALL.len()];
    for run in 0..cfg.runs {
        let split_seed = derive_seed(&[cfg.base_seed, Suite::Csv.tag(), run as u64]);
        let (train, test) = split(data, cfg.csv_n_train, split_seed)?;
        for method in Method::ALL {
            let context = format!("{dataset_id} run {run}");
            let (result, _) = run_cell(method, &train, &test, cfg, split_seed, &context)?;
            per_method[method.ordinal()].push(result);
        }
    }
    Method::ALL
        .iter()
        .map(|&method| {
            ExperimentReport::summarize(
                method,
                dataset_id,
                cfg.csv_n_train,
                per_method[method.ordinal()].clone(),
                echo.clone(),
            )
        })
        .collect()
}

/// Unbiased sample covariance of a set of equal-length vectors.
fn covariance_of(samples: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::Contract(format!(
            "covariance needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let p = samples[0].len();
    let mut mean = DVector::zeros(p);
    for w in samples {
        mean += w;
    }
    mean /= samples.len() as f64;
    let mut cov = DMatrix::zeros(p, p);
    let weight = 1.0 / (samples.len() as f64 - 1.0);
    for w in samples {
        let d = w - &mean;
        cov.ger(weight, &d, &d, 1.0);
    }
    Ok(cov)
}

/// Report serialization formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format {other:?}; valid formats: csv, json"
            ))),
        }
    }
}

/// Writes reports to `path`, ordered by method, then training size, then
/// seed. CSV flattens to one row per run; JSON keeps the full structures.
pub fn emit_report<P: AsRef<Path>>(
    reports: &[ExperimentReport],
    format: ReportFormat,
    path: P,
) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Validation("no reports to emit".into()));
    }
    let mut ordered: Vec<ExperimentReport> = reports.to_vec();
    ordered.sort_by(|a, b| {
        a.method
            .ordinal()
            .cmp(&b.method.ordinal())
            .then(a.n_train.cmp(&b.n_train))
            .then(a.dataset_id.cmp(&b.dataset_id))
    });
    for report in &mut ordered {
        report.per_run.sort_by_key(|r| r.seed);
    }
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_path(path)?;
            writer.write_record([
                "method",
                "dataset_id",
                "n_train",
                "seed",
                "error_rate",
                "wall_time_s",
            ])?;
            for report in &ordered {
                for run in &report.per_run {
                    writer.write_record([
                        report.method.name().to_string(),
                        report.dataset_id.clone(),
                        report.n_train.to_string(),
                        run.seed.to_string(),
                        run.error_rate.to_string(),
                        run.wall_time_s.to_string(),
                    ])?;
                }
            }
            writer.flush()?;
        }
        ReportFormat::Json => {
            let file = std::fs::File::create(path)?;
            serde_json::to_writer_pretty(file, &ordered)?;
        }
    }
    Ok(())
}

/// Writes the visualization weight vectors: one row per feature, one column
/// for the truth and for each method.
fn write_weight_table<P: AsRef<Path>>(art: &VisualizationArtifacts, path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["truth".to_string()];
    header.extend(art.weights.iter().map(|(m, _)| m.name().to_string()));
    writer.write_record(&header)?;
    for i in 0..art.truth.len() {
        let mut row = vec![art.truth[i].to_string()];
        row.extend(art.weights.iter().map(|(_, w)| w[i].to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a dense matrix as CSV rows, no header.
fn write_matrix_csv<P: AsRef<Path>>(matrix: &DMatrix<f64>, path: P) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| matrix[(i, j)].to_string())
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
