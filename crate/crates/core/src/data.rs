//! Datasets, ingestion, standardization, complementary-label generation and
//! the split protocols.
//!
//! Labels are stored 0-based; CSV files use 1-based labels.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

/// Row-major feature matrix shared by both dataset kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    values: Vec<f64>,
    dim: usize,
}

impl Features {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return invalid(format!("{} values do not form rows of dimension {dim}", values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite feature in row {}", i / dim + 1));
        }
        Ok(Features { values, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("rows have differing lengths");
        }
        Features::new(rows.concat(), dim)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    fn select(&self, idx: &[usize]) -> Features {
        let mut values = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Features { values, dim: self.dim }
    }
}

/// Operations shared by ordinarily and complementarily labeled datasets.
pub trait Dataset: Sized {
    fn features(&self) -> &Features;
    fn labels(&self) -> &[usize];
    fn num_classes(&self) -> usize;
    /// Rows `idx`, in that order.
    fn select(&self, idx: &[usize]) -> Self;

    fn len(&self) -> usize {
        self.labels().len()
    }

    fn is_empty(&self) -> bool {
        self.labels().is_empty()
    }

    fn dim(&self) -> usize {
        self.features().dim()
    }

    /// `(row, label)` pairs, the shape the risk estimators consume.
    fn samples(&self) -> Vec<(&[f64], usize)> {
        self.features().rows().zip(self.labels().iter().copied()).collect()
    }
}

fn check_labels(labels: &[usize], n: usize, classes: usize) -> Result<()> {
    if labels.len() != n {
        return invalid(format!("{} labels for {n} rows", labels.len()));
    }
    if classes < 2 {
        return invalid(format!("need at least 2 classes, got {classes}"));
    }
    if let Some(i) = labels.iter().position(|&y| y >= classes) {
        return invalid(format!("row {}: label {} outside 1..={classes}", i + 1, labels[i] + 1));
    }
    Ok(())
}

/// Patterns with ordinary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Features,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Features, labels: Vec<usize>, classes: usize) -> Result<Self> {
        check_labels(&labels, features.len(), classes)?;
        Ok(LabeledDataset { features, labels, classes })
    }

    /// Same patterns and labels with the class count raised to `classes`
    /// (used when a subset happens not to contain the largest label).
    pub fn with_classes(mut self, classes: usize) -> Result<Self> {
        check_labels(&self.labels, self.features.len(), classes)?;
        self.classes = classes;
        Ok(self)
    }

    /// Row indices grouped by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }

    /// Keeps only the given classes (0-based) and relabels them `0..classes.len()`
    /// in the given order.
    pub fn restrict_classes(&self, classes: &[usize]) -> Result<Self> {
        if classes.len() < 2 {
            return invalid("a class subset needs at least 2 classes");
        }
        let mut map = vec![None; self.classes];
        for (new, &old) in classes.iter().enumerate() {
            if old >= self.classes {
                return invalid(format!("class {} not present (K = {})", old + 1, self.classes));
            }
            if map[old].replace(new).is_some() {
                return invalid(format!("class {} listed twice", old + 1));
            }
        }
        let idx: Vec<usize> = (0..self.len()).filter(|&i| map[self.labels[i]].is_some()).collect();
        let labels = idx.iter().map(|&i| map[self.labels[i]].unwrap()).collect();
        LabeledDataset::new(self.features.select(&idx), labels, classes.len())
    }
}

impl Dataset for LabeledDataset {
    fn features(&self) -> &Features {
        &self.features
    }

    fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn select(&self, idx: &[usize]) -> Self {
        LabeledDataset {
            features: self.features.select(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// Patterns with complementary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompDataset {
    features: Features,
    comp_labels: Vec<usize>,
    classes: usize,
}

impl CompDataset {
    pub fn new(features: Features, comp_labels: Vec<usize>, classes: usize) -> Result<Self> {
        check_labels(&comp_labels, features.len(), classes)?;
        Ok(CompDataset { features, comp_labels, classes })
    }
}

impl Dataset for CompDataset {
    fn features(&self) -> &Features {
        &self.features
    }

    fn labels(&self) -> &[usize] {
        &self.comp_labels
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn select(&self, idx: &[usize]) -> Self {
        CompDataset {
            features: self.features.select(idx),
            comp_labels: idx.iter().map(|&i| self.comp_labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// Reads a CSV file with a header row, numeric feature columns and one
/// integer label column (labels `1..=K`). `K` is the largest label seen.
pub fn load_csv(path: &Path, label_col: &str) -> Result<LabeledDataset> {
    let parse_err = |row: usize, message: String| Error::Parse { path: path.to_path_buf(), row, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| parse_err(0, format!("no column named `{label_col}`")))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(parse_err(0, "no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(parse_err(row, format!("expected {} fields, got {}", headers.len(), record.len())));
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                let y: i64 = cell.parse().map_err(|_| parse_err(row, format!("label `{cell}` is not an integer")))?;
                if y < 1 {
                    return Err(parse_err(row, format!("label {y} out of range (labels start at 1)")));
                }
                labels.push(y as usize - 1);
            } else {
                let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    parse_err(row, format!("column `{}`: `{cell}` is not a finite number", &headers[j]))
                })?;
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(parse_err(0, "no data rows".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(parse_err(0, "need at least 2 distinct classes".into()));
    }
    LabeledDataset::new(Features::new(values, dim)?, labels, classes)
}

/// Writes a dataset in the format read by [`load_csv`], with feature columns
/// `x1..xd` and a final `label` column.
pub fn write_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for (x, y) in data.samples() {
        let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        rec.push((y + 1).to_string());
        writer.write_record(&rec)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Per-dimension population mean and standard deviation of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    /// Standard deviations below `1e-12` are stored as 1.
    pub std: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(train: &Features) -> Result<Self> {
        if train.is_empty() {
            return invalid("cannot standardize an empty feature matrix");
        }
        let n = train.len() as f64;
        let d = train.dim();
        let mut mean = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn apply(&self, features: &Features) -> Result<Features> {
        if features.dim() != self.mean.len() {
            return invalid(format!("stats fitted on {} dimensions, got {}", self.mean.len(), features.dim()));
        }
        let values = features
            .rows()
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s))
            .collect();
        Features::new(values, features.dim())
    }

    pub fn apply_labeled(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        LabeledDataset::new(self.apply(&data.features)?, data.labels.clone(), data.classes)
    }
}

/// Replaces each label `y` by a complementary label drawn uniformly from the
/// other `K-1` classes.
pub fn to_complementary(data: &LabeledDataset, seed: u64) -> Result<CompDataset> {
    let k = data.classes;
    if k < 2 {
        return invalid("complementary labels need at least 2 classes");
    }
    let mut rng = seeded(seed);
    let comp_labels = data
        .labels
        .iter()
        .map(|&y| {
            let r = rng.random_range(0..k - 1);
            if r < y {
                r
            } else {
                r + 1
            }
        })
        .collect();
    CompDataset::new(data.features.clone(), comp_labels, k)
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    idx
}

/// Seeded shuffle, then the first `n - ⌊fraction·n⌋` rows for training and
/// the rest for validation.
pub fn split_train_val<D: Dataset>(data: &D, fraction: f64, seed: u64) -> Result<(D, D)> {
    let n = data.len();
    if n < 4 {
        return invalid(format!("need at least 4 rows to hold out a validation set, got {n}"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return invalid(format!("validation fraction must lie in (0, 1), got {fraction}"));
    }
    let n_val = ((fraction * n as f64).floor() as usize).max(1);
    let idx = shuffled(n, seed);
    let (train, val) = idx.split_at(n - n_val);
    Ok((data.select(train), data.select(val)))
}

/// Seeded shuffle; the first `⌊n/K⌋` rows keep their ordinary labels and the
/// remaining rows get complementary labels (a 1:(K-1) split).
pub fn split_ol_cl(data: &LabeledDataset, seed: u64) -> Result<(LabeledDataset, CompDataset)> {
    let k = data.classes;
    let n = data.len();
    if n < k {
        return invalid(format!("need at least K = {k} rows, got {n}"));
    }
    let idx = shuffled(n, seed);
    let (ord, comp) = idx.split_at(n / k);
    let comp_part = to_complementary(&data.select(comp), crate::rng::derive_seed(seed, 1))?;
    Ok((data.select(ord), comp_part))
}

/// Draws `n_train` and `n_test` rows from every class, without replacement.
pub fn subsample_per_class(
    data: &LabeledDataset,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut rng = seeded(seed);
    let mut train = Vec::with_capacity(n_train * data.classes);
    let mut test = Vec::with_capacity(n_test * data.classes);
    for (class, mut idx) in data.class_indices().into_iter().enumerate() {
        if idx.len() < n_train + n_test {
            return invalid(format!(
                "class {} has {} rows, fewer than the {} train + {} test requested",
                class + 1,
                idx.len(),
                n_train,
                n_test
            ));
        }
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..n_train + n_test]);
    }
    Ok((data.select(&train), data.select(&test)))
}

/// Class mean of [`synth_gaussian`]: class `c` (0-based) sits at
/// `separation · (cos 2πc/K, sin 2πc/K, 0, …, 0)`.
pub fn synth_class_mean(class: usize, k: usize, d: usize, separation: f64) -> Vec<f64> {
    let angle = 2.0 * std::f64::consts::PI * class as f64 / k as f64;
    let mut mean = vec![0.0; d];
    mean[0] = separation * angle.cos();
    mean[1] = separation * angle.sin();
    mean
}

/// Balanced classes of isotropic unit-variance Gaussians with means from
/// [`synth_class_mean`]. Rows are grouped by class.
pub fn synth_gaussian(k: usize, d: usize, n_per_class: usize, separation: f64, seed: u64) -> Result<LabeledDataset> {
    if k < 2 || d < 2 || n_per_class < 1 {
        return invalid(format!("need K >= 2, d >= 2, n_per_class >= 1 (got {k}, {d}, {n_per_class})"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return invalid(format!("separation must be finite and nonnegative, got {separation}"));
    }
    let mut rng = seeded(seed);
    let mut values = Vec::with_capacity(k * n_per_class * d);
    let mut labels = Vec::with_capacity(k * n_per_class);
    for class in 0..k {
        let mean = synth_class_mean(class, k, d, separation);
        for _ in 0..n_per_class {
            values.extend(mean.iter().map(|m| m + Distribution::<f64>::sample(&StandardNormal, &mut rng)));
            labels.push(class);
        }
    }
    LabeledDataset::new(Features::new(values, d)?, labels, k)
}
