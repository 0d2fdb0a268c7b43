//! Synthetic benchmark generator with equicorrelated feature groups, plus
//! CSV persistence and seeded train/test splitting.
//!
//! Each feature group shares one latent factor: a member is
//! `sqrt(rho) * g + sqrt(1 - rho) * e` with `g` and `e` standard normal, so
//! every within-group pair has correlation exactly `rho` and unit variance.
//! Features outside any group are independent standard normals with zero
//! weight in the true classifier.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// How one group's true weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightRule {
    /// Every member gets exactly this value.
    FixedValue(f64),
    /// Magnitudes uniform in [1, 5], one random sign shared by the group.
    RandomSameSign,
}

/// One block of mutually correlated features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub size: usize,
    pub correlation: f64,
    pub weight_rule: WeightRule,
}

/// Full description of a synthetic problem. Groups occupy the leading
/// feature indices in order; remaining features are noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub p: usize,
    pub groups: Vec<GroupSpec>,
    pub n_train: usize,
    pub n_test: usize,
    /// When set, labels are `sign(w . x + b)` instead of Bernoulli draws
    /// from the logistic probability.
    pub noiseless_labels: bool,
}

impl SynthSpec {
    /// Two groups of four features at correlation 0.81 with fixed weights
    /// +5 and -5, out of 40 features total; 2000 test points.
    pub fn two_group_default(n_train: usize) -> Self {
        Self {
            p: 40,
            groups: vec![
                GroupSpec {
                    size: 4,
                    correlation: 0.81,
                    weight_rule: WeightRule::FixedValue(5.0),
                },
                GroupSpec {
                    size: 4,
                    correlation: 0.81,
                    weight_rule: WeightRule::FixedValue(-5.0),
                },
            ],
            n_train,
            n_test: 2000,
            noiseless_labels: false,
        }
    }

    /// Like [`SynthSpec::two_group_default`] but with random same-sign
    /// weights per group.
    pub fn two_group_random_weights(n_train: usize) -> Self {
        let mut spec = Self::two_group_default(n_train);
        for group in &mut spec.groups {
            group.weight_rule = WeightRule::RandomSameSign;
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Validation("p must be positive".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Validation(format!(
                "need positive train and test sizes, got {} and {}",
                self.n_train, self.n_test
            )));
        }
        let total: usize = self.groups.iter().map(|g| g.size).sum();
        if total > self.p {
            return Err(Error::Validation(format!(
                "groups cover {total} features but p = {}",
                self.p
            )));
        }
        for (i, group) in self.groups.iter().enumerate() {
            if group.size == 0 {
                return Err(Error::Validation(format!("group {i} is empty")));
            }
            if !(0.0..1.0).contains(&group.correlation) || !group.correlation.is_finite() {
                return Err(Error::Validation(format!(
                    "group {i} correlation {} outside [0, 1)",
                    group.correlation
                )));
            }
            if let WeightRule::FixedValue(v) = group.weight_rule {
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "group {i} weight {v} not finite"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The classifier that generated a synthetic sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub w: DVector<f64>,
    pub b: f64,
}

/// One generated problem instance.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: GroundTruth,
}

/// Draws a training and test set from `spec` with group-correlated features.
///
/// The true intercept is standard normal; labels are +1 with probability
/// `sigmoid(w . x + b)` unless `noiseless_labels` asks for the plain sign.
pub fn generate_correlated(spec: &SynthSpec, seed: u64) -> Result<SynthSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut w = DVector::zeros(spec.p);
    let mut offset = 0;
    for group in &spec.groups {
        match group.weight_rule {
            WeightRule::FixedValue(v) => {
                for j in 0..group.size {
                    w[offset + j] = v;
                }
            }
            WeightRule::RandomSameSign => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for j in 0..group.size {
                    w[offset + j] = sign * rng.random_range(1.0..5.0);
                }
            }
        }
        offset += group.size;
    }
    let b: f64 = rng.sample(StandardNormal);

    let n = spec.n_train + spec.n_test;
    let mut features = DMatrix::zeros(n, spec.p);
    let mut labels = DVector::zeros(n);
    for i in 0..n {
        let mut j = 0;
        for group in &spec.groups {
            let shared: f64 = rng.sample(StandardNormal);
            let (load_shared, load_own) =
                (group.correlation.sqrt(), (1.0 - group.correlation).sqrt());
            for _ in 0..group.size {
                let own: f64 = rng.sample(StandardNormal);
                features[(i, j)] = load_shared * shared + load_own * own;
                j += 1;
            }
        }
        while j < spec.p {
            features[(i, j)] = rng.sample(StandardNormal);
            j += 1;
        }
        let margin = features.row(i).transpose().dot(&w) + b;
        labels[i] = if spec.noiseless_labels {
            if margin >= 0.0 {
                1.0
            } else {
                -1.0
            }
        } else {
            let u: f64 = rng.random();
            if u < logistic(margin) {
                1.0
            } else {
                -1.0
            }
        };
    }

    let all = Dataset::new(features, labels)?;
    let train_rows: Vec<usize> = (0..spec.n_train).collect();
    let test_rows: Vec<usize> = (spec.n_train..n).collect();
    Ok(SynthSample {
        train: all.select_rows(&train_rows)?,
        test: all.select_rows(&test_rows)?,
        truth: GroundTruth { w, b },
    })
}

/// Same as [`generate_correlated`] with every group correlation forced to
/// zero, making all features independent.
pub fn generate_independent(spec: &SynthSpec, seed: u64) -> Result<SynthSample> {
    let mut flat = spec.clone();
    for group in &mut flat.groups {
        group.correlation = 0.0;
    }
    generate_correlated(&flat, seed)
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Writes `data` as CSV: header `x0..x{p-1},y`, one row per observation,
/// features with 17 significant digits (lossless for f64), labels as
/// bare `1` or `-1`.
pub fn save_csv<P: AsRef<Path>>(data: &Dataset, path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..data.p())
        .map(|j| format!("x{j}"))
        .chain(std::iter::once("y".into()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..data.n() {
        line.clear();
        for j in 0..data.p() {
            line.push_str(&format!("{:.16e},", data.features()[(i, j)]));
        }
        line.push_str(if data.labels()[i] == 1.0 { "1" } else { "-1" });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Which CSV column holds the labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// By header name; the file must start with a header row.
    Name(String),
    /// By zero-based position; works with or without a header row.
    Index(usize),
}

/// Translation from raw label text to the required +1 / -1 values.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelMap {
    /// Parse the field as a number that must equal +1 or -1.
    Numeric,
    /// Explicit text-to-value table, e.g. `{"spam": 1, "ham": -1}`.
    Table(HashMap<String, f64>),
}

impl LabelMap {
    /// Builds a table map, rejecting target values other than +1 and -1.
    pub fn table<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut map = HashMap::new();
        for (raw, value) in pairs {
            if value != 1.0 && value != -1.0 {
                return Err(Error::Validation(format!(
                    "labels must map to +1 or -1, got {value}"
                )));
            }
            map.insert(raw.into(), value);
        }
        if map.is_empty() {
            return Err(Error::Validation("label map is empty".into()));
        }
        Ok(Self::Table(map))
    }

    fn apply(&self, raw: &str) -> Option<f64> {
        match self {
            Self::Numeric => raw.parse::<f64>().ok().filter(|v| *v == 1.0 || *v == -1.0),
            Self::Table(map) => map.get(raw).copied(),
        }
    }
}

/// Reads a CSV file into a [`Dataset`].
///
/// The label column is selected by name or index and translated through
/// `label_map`; every other column is parsed as a feature. A header row is
/// required when the label column is named, and detected otherwise by
/// checking whether the first row parses as data. Errors name the offending
/// 1-based line and field.
pub fn load_csv<P: AsRef<Path>>(
    path: P,
    label: &LabelColumn,
    label_map: &LabelMap,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(BufReader::new(File::open(path)?));
    let mut records = reader.records();
    let first = records
        .next()
        .ok_or_else(|| Error::Validation("csv file is empty".into()))??;
    let width = first.len();
    if width < 2 {
        return Err(Error::Validation(format!(
            "need at least one feature column and a label column, first row has {width} fields"
        )));
    }

    let (label_idx, first_is_header) = match label {
        LabelColumn::Name(name) => {
            let idx = first
                .iter()
                .position(|field| field.trim() == name)
                .ok_or_else(|| {
                    Error::Config(format!("no column named {name:?} in the header row"))
                })?;
            (idx, true)
        }
        LabelColumn::Index(idx) => {
            if *idx >= width {
                return Err(Error::Config(format!(
                    "label column {idx} out of range for {width} columns"
                )));
            }
            let parses_as_data = first.iter().enumerate().all(|(j, field)| {
                if j == *idx {
                    label_map.apply(field.trim()).is_some()
                } else {
                    field.trim().parse::<f64>().is_ok()
                }
            });
            (*idx, !parses_as_data)
        }
    };

    let p = width - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut parse_row = |record: &csv::StringRecord, line: usize| -> Result<()> {
        if record.len() != width {
            return Err(Error::CsvParse {
                line,
                field: record.len(),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let raw = field.trim();
            if j == label_idx {
                let value = label_map.apply(raw).ok_or_else(|| Error::CsvParse {
                    line,
                    field: j + 1,
                    message: format!("unmapped label {raw:?}"),
                })?;
                labels.push(value);
            } else {
                let value: f64 = raw.parse().map_err(|e| Error::CsvParse {
                    line,
                    field: j + 1,
                    message: format!("{e}: {raw:?}"),
                })?;
                features.push(value);
            }
        }
        Ok(())
    };

    if !first_is_header {
        parse_row(&first, 1)?;
    }
    for (idx, record) in records.enumerate() {
        parse_row(&record?, idx + 2)?;
    }
    if labels.is_empty() {
        return Err(Error::Validation("csv contains no data rows".into()));
    }
    let n = labels.len();
    let features = DMatrix::from_row_iterator(n, p, features);
    Dataset::new(features, DVector::from_vec(labels))
}

/// Splits `data` into a train set of `n_train` rows and a test set of the
/// rest after a seeded shuffle.
pub fn split(data: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train >= data.n() {
        return Err(Error::Validation(format!(
            "n_train must be in [1, {}), got {n_train}",
            data.n()
        )));
    }
    let mut indices: Vec<usize> = (0..data.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train = data.select_rows(&indices[..n_train])?;
    let test = data.select_rows(&indices[n_train..])?;
    Ok((train, test))
}
