//! Run manifests: everything a `bench` or `combine` run depends on.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use complabel_core::optim::{LINEAR_LAMBDA_GRID, MLP_LAMBDA_GRID};
use complabel_core::{AdamConfig, Architecture, BinaryLossKind, LossSpec, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Bench,
    Combine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_col")]
        label_col: String,
    },
    /// Isotropic Gaussian classes; a fresh pool is drawn for every trial.
    Synth { classes: usize, dim: usize, separation: f64 },
}

fn default_label_col() -> String {
    "label".into()
}

impl DatasetSource {
    /// Short name used in result tables (no commas or whitespace).
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Csv { path, .. } => {
                path.file_stem().map(|s| s.to_string_lossy().replace([',', ' '], "_")).unwrap_or_else(|| "csv".into())
            }
            DatasetSource::Synth { classes, dim, separation } => format!("synth-k{classes}-d{dim}-sep{separation}"),
        }
    }
}

/// `synth:k=3,d=2,sep=4` or a CSV path. The label column of a CSV source
/// is set separately.
impl FromStr for DatasetSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let Some(params) = s.strip_prefix("synth:").or(if s == "synth" { Some("") } else { None }) else {
            return Ok(DatasetSource::Csv { path: PathBuf::from(s), label_col: default_label_col() });
        };
        let (mut classes, mut dim, mut separation) = (3, 2, 4.0);
        for kv in params.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = kv.split_once('=').with_context(|| format!("expected key=value, got `{kv}`"))?;
            let bad = || format!("bad value for `{key}`: `{value}`");
            match key.trim() {
                "k" | "classes" => classes = value.trim().parse().with_context(bad)?,
                "d" | "dim" => dim = value.trim().parse().with_context(bad)?,
                "sep" | "separation" => separation = value.trim().parse().with_context(bad)?,
                other => bail!("unknown synth parameter `{other}` (expected k, d, sep)"),
            }
        }
        Ok(DatasetSource::Synth { classes, dim, separation })
    }
}

/// Parses a 1-based class list such as `1,2,3`, `1-3` or `1-3,7`.
pub fn parse_class_list(s: &str) -> anyhow::Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let parse = |v: &str| v.trim().parse::<usize>().with_context(|| format!("bad class `{v}` in `{s}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                ensure!(a <= b, "empty class range `{part}`");
                out.extend(a..=b);
            }
            None => out.push(parse(part)?),
        }
    }
    ensure!(out.len() >= 2, "need at least two classes, got `{s}`");
    ensure!(out.iter().all(|&c| c >= 1), "classes are numbered from 1");
    let mut sorted = out.clone();
    sorted.sort_unstable();
    sorted.dedup();
    ensure!(sorted.len() == out.len(), "duplicate class in `{s}`");
    Ok(out)
}

/// Compact label for a class list: `1-3` for a contiguous run, else `1+4+7`.
pub fn class_label(classes: &[usize]) -> String {
    let contiguous = classes.windows(2).all(|w| w[1] == w[0] + 1);
    match (contiguous, classes.first(), classes.last()) {
        (true, Some(a), Some(b)) if classes.len() > 2 => format!("{a}-{b}"),
        _ => classes.iter().map(usize::to_string).collect::<Vec<_>>().join("+"),
    }
}

/// Builds method specs from scheme and loss lists. A single loss is applied
/// to every scheme; `pl` always uses the squared hinge.
pub fn methods_from_lists(schemes: &str, losses: &str) -> anyhow::Result<Vec<LossSpec>> {
    let schemes: Vec<&str> = schemes.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let losses: Vec<&str> = losses.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    ensure!(!schemes.is_empty(), "no scheme given");
    ensure!(
        losses.len() == 1 || losses.len() == schemes.len(),
        "give one loss or one per scheme ({} schemes, {} losses)",
        schemes.len(),
        losses.len()
    );
    schemes
        .iter()
        .enumerate()
        .map(|(i, scheme)| {
            let loss = losses[if losses.len() == 1 { 0 } else { i }];
            let text = if *scheme == "pl" { "pl".to_string() } else { format!("{scheme}/{loss}") };
            text.parse::<LossSpec>().with_context(|| format!("bad method `{text}`"))
        })
        .collect()
}

mod spec_strings {
    use complabel_core::LossSpec;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(specs: &[LossSpec], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(specs.iter().map(ToString::to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<LossSpec>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(D::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingOptions {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Defaults to the grid for the chosen model.
    pub lambda_grid: Option<Vec<f64>>,
    pub eval_stride: usize,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        let base = TrainConfig::new(LossSpec::pc(BinaryLossKind::Sigmoid));
        TrainingOptions {
            iterations: base.iterations,
            batch_size: base.batch_size,
            learning_rate: base.adam.learning_rate,
            lambda_grid: None,
            eval_stride: base.eval_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub dataset: DatasetSource,
    /// 1-based class subset; all classes when absent.
    #[serde(default)]
    pub classes: Option<Vec<usize>>,
    #[serde(with = "spec_strings", default = "default_methods")]
    pub methods: Vec<LossSpec>,
    #[serde(default = "default_model")]
    pub model: Architecture,
    #[serde(default = "default_per_class")]
    pub train_per_class: usize,
    #[serde(default = "default_per_class")]
    pub test_per_class: usize,
    /// Weight of the ordinary term in the combined column of `combine`.
    /// `bench` is complementary-only and rejects other values than 0.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub training: TrainingOptions,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Per-trial validation histories of the selected runs.
    #[serde(default)]
    pub history_dir: Option<PathBuf>,
    /// Per-trial parameter files of the selected models.
    #[serde(default)]
    pub models_dir: Option<PathBuf>,
}

fn default_methods() -> Vec<LossSpec> {
    vec![LossSpec::pc(BinaryLossKind::Sigmoid)]
}

fn default_model() -> Architecture {
    Architecture::Linear
}

fn default_per_class() -> usize {
    500
}

fn default_trials() -> usize {
    5
}

impl RunManifest {
    pub fn new(command: Command, dataset: DatasetSource) -> Self {
        RunManifest {
            command,
            dataset,
            classes: None,
            methods: default_methods(),
            model: default_model(),
            train_per_class: default_per_class(),
            test_per_class: default_per_class(),
            alpha: None,
            training: TrainingOptions::default(),
            trials: default_trials(),
            seed: 0,
            out: None,
            history_dir: None,
            models_dir: None,
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        Ok(manifest)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(!self.methods.is_empty(), "no methods given");
        ensure!(self.train_per_class >= 1 && self.test_per_class >= 1, "per-class sizes must be at least 1");
        if let DatasetSource::Csv { path, .. } = &self.dataset {
            ensure!(path.is_file(), "dataset {} does not exist", path.display());
        }
        if let Some(classes) = &self.classes {
            ensure!(classes.len() >= 2 && classes.iter().all(|&c| c >= 1), "class subset needs >= 2 classes from 1");
        }
        if let Some(alpha) = self.alpha {
            ensure!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1], got {alpha}");
        }
        match self.command {
            Command::Bench => {
                ensure!(self.alpha.unwrap_or(0.0) == 0.0, "bench trains on complementary labels only; drop --alpha");
            }
            Command::Combine => {
                ensure!(self.methods.len() == 1, "combine takes exactly one method");
                ensure!(
                    self.methods[0].scheme.is_unbiased(),
                    "combine needs an unbiased scheme (ova or pc), got {}",
                    self.methods[0]
                );
            }
        }
        self.train_config(self.methods[0], 0.0).validate()?;
        Ok(())
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        match (&self.training.lambda_grid, self.model) {
            (Some(grid), _) => grid.clone(),
            (None, Architecture::Linear) => LINEAR_LAMBDA_GRID.to_vec(),
            (None, Architecture::Mlp) => MLP_LAMBDA_GRID.to_vec(),
        }
    }

    pub fn train_config(&self, spec: LossSpec, alpha: f64) -> TrainConfig {
        TrainConfig {
            iterations: self.training.iterations,
            batch_size: self.training.batch_size,
            adam: AdamConfig { learning_rate: self.training.learning_rate, ..AdamConfig::default() },
            lambda_grid: self.lambda_grid(),
            eval_stride: self.training.eval_stride,
            seed: 0,
            alpha,
            spec,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Bench => "bench",
            Command::Combine => "combine",
        })
    }
}
