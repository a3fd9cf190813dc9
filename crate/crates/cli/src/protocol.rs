//! Trial protocols behind `bench` and `combine`.
//!
//! Trial `t` uses seed `base + t`. Every random step draws from its own
//! derived stream of that seed, so methods within a trial see the same data
//! splits and the same initial model.

use std::path::Path;

use anyhow::{ensure, Context};
use rayon::prelude::*;

use complabel_core::data::{split_ol_cl, split_train_val, subsample_per_class, synth_gaussian, to_complementary};
use complabel_core::models::write_params;
use complabel_core::optim::{accuracy, grid_search, write_history_csv, GridOutcome, Supervision};
use complabel_core::rng::{derive_seed, seeded};
use complabel_core::{Dataset, LabeledDataset, LossSpec, Model, StandardizationStats};

use crate::manifest::{class_label, Command, DatasetSource, RunManifest};
use crate::report::ResultTable;

const VALIDATION_FRACTION: f64 = 0.25;

mod stream {
    pub const SYNTH_POOL: u64 = 0;
    pub const SUBSAMPLE: u64 = 1;
    pub const LABELS: u64 = 2;
    pub const VALIDATION: u64 = 3;
    pub const INIT: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const SECOND_VALIDATION: u64 = 6;
}

/// Method names of the three `combine` columns.
pub const OL: &str = "OL";
pub const CL: &str = "CL";
pub const OL_CL: &str = "OL&CL";

/// Source data loaded once per run; synthetic pools are drawn per trial.
enum Source {
    Loaded(LabeledDataset),
    Synth { classes: usize, dim: usize, separation: f64 },
}

struct Prepared {
    train: LabeledDataset,
    test: LabeledDataset,
    classes: Vec<usize>,
}

fn load_source(manifest: &RunManifest) -> anyhow::Result<Source> {
    match &manifest.dataset {
        DatasetSource::Csv { path, label_col } => {
            let data = complabel_core::load_csv(path, label_col)
                .with_context(|| format!("loading dataset {}", path.display()))?;
            Ok(Source::Loaded(data))
        }
        &DatasetSource::Synth { classes, dim, separation } => Ok(Source::Synth { classes, dim, separation }),
    }
}

fn prepare_trial(manifest: &RunManifest, source: &Source, seed: u64) -> anyhow::Result<Prepared> {
    let per_class = manifest.train_per_class + manifest.test_per_class;
    let pool = match source {
        Source::Loaded(data) => data.clone(),
        &Source::Synth { classes, dim, separation } => {
            synth_gaussian(classes, dim, per_class, separation, derive_seed(seed, stream::SYNTH_POOL))?
        }
    };
    let classes: Vec<usize> = manifest.classes.clone().unwrap_or_else(|| (1..=pool.num_classes()).collect());
    let pool = if manifest.classes.is_some() {
        let zero_based: Vec<usize> = classes.iter().map(|c| c - 1).collect();
        pool.restrict_classes(&zero_based).context("selecting classes")?
    } else {
        pool
    };
    let (train, test) = subsample_per_class(
        &pool,
        manifest.train_per_class,
        manifest.test_per_class,
        derive_seed(seed, stream::SUBSAMPLE),
    )?;
    let stats = StandardizationStats::fit(train.features())?;
    Ok(Prepared { train: stats.apply_labeled(&train)?, test: stats.apply_labeled(&test)?, classes })
}

fn method_slug(method: &str) -> String {
    method.replace(['/', '&'], "-")
}

fn save_artifacts(
    manifest: &RunManifest,
    method: &str,
    trial: usize,
    grid: &GridOutcome,
    seed: u64,
) -> anyhow::Result<()> {
    let stem = format!("{}_trial{trial}", method_slug(method));
    if let Some(dir) = &manifest.history_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_history_csv(&dir.join(format!("{stem}.csv")), &grid.outcome.history)?;
    }
    if let Some(dir) = &manifest.models_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_params(&dir.join(format!("{stem}.params")), &grid.outcome.best_model, seed)?;
    }
    Ok(())
}

/// Test accuracies of every method in one `bench` trial.
fn bench_trial(manifest: &RunManifest, source: &Source, trial: usize) -> TrialResult {
    let seed = manifest.seed + trial as u64;
    let data = prepare_trial(manifest, source, seed)?;
    let comp = to_complementary(&data.train, derive_seed(seed, stream::LABELS))?;
    let (tr, va) = split_train_val(&comp, VALIDATION_FRACTION, derive_seed(seed, stream::VALIDATION))?;
    let k = data.train.num_classes();
    let init = Model::init(manifest.model, k, data.train.dim(), &mut seeded(derive_seed(seed, stream::INIT)))?;
    let mut accuracies = Vec::with_capacity(manifest.methods.len());
    for &spec in &manifest.methods {
        let config =
            complabel_core::TrainConfig { seed: derive_seed(seed, stream::TRAIN), ..manifest.train_config(spec, 0.0) };
        let grid = grid_search(
            &config.lambda_grid,
            &init,
            Supervision::complementary(&tr),
            Supervision::complementary(&va),
            &config,
        )
        .with_context(|| format!("training {spec} in trial {trial}"))?;
        save_artifacts(manifest, &spec.to_string(), trial, &grid, seed)?;
        accuracies.push(accuracy(&grid.outcome.best_model, &data.test));
    }
    Ok((accuracies, data.classes))
}

/// Test accuracies of OL, CL and OL&CL in one `combine` trial.
fn combine_trial(manifest: &RunManifest, source: &Source, trial: usize) -> TrialResult {
    let seed = manifest.seed + trial as u64;
    let spec = manifest.methods[0];
    let alpha = manifest.alpha.unwrap_or(0.5);
    let data = prepare_trial(manifest, source, seed)?;
    let (ord, comp) = split_ol_cl(&data.train, derive_seed(seed, stream::LABELS))?;
    let (ord_tr, ord_va) = split_train_val(&ord, VALIDATION_FRACTION, derive_seed(seed, stream::VALIDATION))?;
    let (comp_tr, comp_va) = split_train_val(&comp, VALIDATION_FRACTION, derive_seed(seed, stream::SECOND_VALIDATION))?;
    let k = data.train.num_classes();
    let init = Model::init(manifest.model, k, data.train.dim(), &mut seeded(derive_seed(seed, stream::INIT)))?;

    let both_train = Supervision { ord: Some(&ord_tr), comp: Some(&comp_tr) };
    let both_val = Supervision { ord: Some(&ord_va), comp: Some(&comp_va) };
    let columns = [
        (OL, 1.0, Supervision::ordinary(&ord_tr), Supervision::ordinary(&ord_va)),
        (CL, 0.0, Supervision::complementary(&comp_tr), Supervision::complementary(&comp_va)),
        (OL_CL, alpha, both_train, both_val),
    ];
    let mut accuracies = Vec::with_capacity(columns.len());
    for (name, alpha, train_data, val_data) in columns {
        let config = complabel_core::TrainConfig {
            seed: derive_seed(seed, stream::TRAIN),
            ..manifest.train_config(spec, alpha)
        };
        let grid = grid_search(&config.lambda_grid, &init, train_data, val_data, &config)
            .with_context(|| format!("training {name} in trial {trial}"))?;
        save_artifacts(manifest, name, trial, &grid, seed)?;
        accuracies.push(accuracy(&grid.outcome.best_model, &data.test));
    }
    Ok((accuracies, data.classes))
}

/// Per-method test accuracies and the 1-based classes used.
type TrialResult = anyhow::Result<(Vec<f64>, Vec<usize>)>;
type TrialFn = fn(&RunManifest, &Source, usize) -> TrialResult;

fn run_trials(manifest: &RunManifest, names: Vec<String>, trial_fn: TrialFn) -> anyhow::Result<ResultTable> {
    manifest.validate()?;
    let source = load_source(manifest)?;
    let results: Vec<(Vec<f64>, Vec<usize>)> =
        (0..manifest.trials).into_par_iter().map(|t| trial_fn(manifest, &source, t)).collect::<anyhow::Result<_>>()?;
    let classes = class_label(&results[0].1);
    let per_method = names
        .into_iter()
        .enumerate()
        .map(|(m, name)| (name, results.iter().map(|(acc, _)| acc[m]).collect()))
        .collect();
    let mut table = ResultTable::default();
    table.push_group(&manifest.dataset.name(), &classes, per_method);
    if let Some(out) = &manifest.out {
        write_table(&table, out)?;
    }
    Ok(table)
}

fn write_table(table: &ResultTable, out: &Path) -> anyhow::Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    table.write_csv(out)
}

/// Complementary-label benchmark: every method trained on the same
/// complementary labels, evaluated on ordinary test labels.
pub fn run_bench(manifest: &RunManifest) -> anyhow::Result<ResultTable> {
    ensure!(manifest.command == Command::Bench, "manifest is for `{}`, not `bench`", manifest.command);
    let names = manifest.methods.iter().map(LossSpec::to_string).collect();
    run_trials(manifest, names, bench_trial)
}

/// Ordinary vs complementary vs combined supervision on a 1:(K-1) split of
/// the training data.
pub fn run_combine(manifest: &RunManifest) -> anyhow::Result<ResultTable> {
    ensure!(manifest.command == Command::Combine, "manifest is for `{}`, not `combine`", manifest.command);
    let names = [OL, CL, OL_CL].map(String::from).to_vec();
    run_trials(manifest, names, combine_trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use complabel_core::BinaryLossKind;

    fn small(command: Command) -> RunManifest {
        let mut m = RunManifest::new(command, "synth:k=3,d=2,sep=4".parse().unwrap());
        m.train_per_class = 40;
        m.test_per_class = 40;
        m.trials = 2;
        m.training.iterations = 200;
        m.training.lambda_grid = Some(vec![1e-4]);
        m
    }

    #[test]
    fn bench_table_shape() {
        let mut m = small(Command::Bench);
        m.methods = vec![LossSpec::pc(BinaryLossKind::Sigmoid), LossSpec::pl()];
        let table = run_bench(&m).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].method, "pc/sigmoid");
        assert_eq!(table.rows[0].classes, "1-3");
        assert!(table.rows.iter().all(|r| r.accuracies.len() == 2));
        assert!(table.rows.iter().any(|r| r.bold));
    }

    #[test]
    fn combine_table_shape() {
        let table = run_combine(&small(Command::Combine)).unwrap();
        let names: Vec<&str> = table.rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, vec![OL, CL, OL_CL]);
    }

    #[test]
    fn class_subset_and_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = small(Command::Bench);
        m.dataset = "synth:k=4,d=2,sep=4".parse().unwrap();
        m.classes = Some(vec![1, 3, 4]);
        m.trials = 1;
        m.history_dir = Some(dir.path().join("hist"));
        m.models_dir = Some(dir.path().join("models"));
        let table = run_bench(&m).unwrap();
        assert_eq!(table.rows[0].classes, "1+3+4");
        assert_eq!(table.rows[0].std, 0.0);
        let hist = std::fs::read_to_string(dir.path().join("hist/pc-sigmoid_trial0.csv")).unwrap();
        assert_eq!(hist.lines().count(), 201);
        let (model, _) =
            complabel_core::models::read_params(&dir.path().join("models/pc-sigmoid_trial0.params")).unwrap();
        assert_eq!(model.num_classes(), 3);
    }

    #[test]
    fn wrong_command_is_rejected() {
        assert!(run_bench(&small(Command::Combine)).is_err());
        assert!(run_combine(&small(Command::Bench)).is_err());
    }
}
