//! Adam, the minibatch training loop with best-validation snapshots, and the
//! weight-decay grid search.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{CompDataset, Dataset, LabeledDataset};
use crate::error::{invalid, Error, Result};
use crate::models::{objective_gradient, Batch, Model};
use crate::multiclass::{LossSpec, Scheme};
use crate::risk::combined_validation_score;
use crate::rng::{seeded, Pcg64};

/// Regularization grid for linear models: `10^-4 … 10^4`.
pub const LINEAR_LAMBDA_GRID: [f64; 9] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];

/// Weight-decay grid for the MLP experiments.
pub const MLP_LAMBDA_GRID: [f64; 3] = [1e-7, 1e-4, 1e-1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState { m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }
}

/// One bias-corrected Adam update, in place. Increments `state.t`.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n || state.v.len() != n {
        return invalid(format!(
            "shape mismatch: {n} params, {} grads, {}/{} moments",
            grad.len(),
            state.m.len(),
            state.v.len()
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
    }
    Ok(())
}

fn default_iterations() -> usize {
    5000
}
fn default_batch_size() -> usize {
    100
}
fn default_eval_stride() -> usize {
    1
}
fn default_lambda_grid() -> Vec<f64> {
    LINEAR_LAMBDA_GRID.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    /// Validate every `eval_stride` iterations.
    #[serde(default = "default_eval_stride")]
    pub eval_stride: usize,
    #[serde(default)]
    pub seed: u64,
    /// Weight of the ordinary term of the objective.
    #[serde(default)]
    pub alpha: f64,
    pub spec: LossSpec,
}

impl TrainConfig {
    pub fn new(spec: LossSpec) -> Self {
        TrainConfig {
            iterations: default_iterations(),
            batch_size: default_batch_size(),
            adam: AdamConfig::default(),
            lambda_grid: default_lambda_grid(),
            eval_stride: default_eval_stride(),
            seed: 0,
            alpha: 0.0,
            spec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 || self.batch_size < 1 || self.eval_stride < 1 {
            return invalid("iterations, batch size and eval stride must be at least 1");
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return invalid("Adam betas must lie in [0, 1)");
        }
        if !(a.epsilon > 0.0 && a.learning_rate > 0.0) {
            return invalid("Adam epsilon and learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return invalid(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.alpha > 0.0 && !self.spec.scheme.is_unbiased() {
            return invalid(format!("the {} scheme cannot use ordinary labels", self.spec.scheme));
        }
        Ok(())
    }

    /// Scheme whose zero-one risk scores validation data. The baselines have
    /// no unbiased risk of their own and are validated with PC.
    pub fn validation_scheme(&self) -> Scheme {
        if self.spec.scheme.is_unbiased() {
            self.spec.scheme
        } else {
            Scheme::Pc
        }
    }
}

/// Ordinary and/or complementary data; which parts are required depends on
/// the objective's `alpha`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Supervision<'a> {
    pub ord: Option<&'a LabeledDataset>,
    pub comp: Option<&'a CompDataset>,
}

impl<'a> Supervision<'a> {
    pub fn complementary(comp: &'a CompDataset) -> Self {
        Supervision { ord: None, comp: Some(comp) }
    }

    pub fn ordinary(ord: &'a LabeledDataset) -> Self {
        Supervision { ord: Some(ord), comp: None }
    }

    /// Parts with nonzero weight under `alpha`, each required to be nonempty.
    fn active(&self, alpha: f64, what: &str) -> Result<(Option<&'a LabeledDataset>, Option<&'a CompDataset>)> {
        let ord = if alpha > 0.0 {
            match self.ord {
                Some(d) if !d.is_empty() => Some(d),
                _ => return invalid(format!("{what}: alpha > 0 needs ordinarily labeled data")),
            }
        } else {
            None
        };
        let comp = if alpha < 1.0 {
            match self.comp {
                Some(d) if !d.is_empty() => Some(d),
                _ => return invalid(format!("{what}: alpha < 1 needs complementarily labeled data")),
            }
        } else {
            None
        };
        Ok((ord, comp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    /// Minibatch objective (including the L2 term) at this iteration.
    pub objective: f64,
    pub validation_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation score.
    pub best_model: Model,
    pub best_iteration: usize,
    pub best_score: f64,
    pub history: Vec<HistoryRow>,
}

/// Hands out indices of one pool, reshuffling after every pass.
struct EpochSampler {
    perm: Vec<usize>,
    cursor: usize,
}

impl EpochSampler {
    fn new(n: usize, rng: &mut Pcg64) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        EpochSampler { perm, cursor: 0 }
    }

    fn take(&mut self, count: usize, rng: &mut Pcg64, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..count {
            if self.cursor == self.perm.len() {
                self.perm.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.perm[self.cursor]);
            self.cursor += 1;
        }
    }
}

/// Splits a minibatch between the two pools in proportion to their sizes,
/// giving each active pool at least one sample.
fn batch_split(batch: usize, n_ord: usize, n_comp: usize) -> (usize, usize) {
    match (n_ord, n_comp) {
        (0, c) => (0, batch.min(c)),
        (o, 0) => (batch.min(o), 0),
        (o, c) => {
            let total = batch.max(2);
            let b_ord = ((total as f64 * o as f64 / (o + c) as f64).round() as usize).clamp(1, total - 1);
            (b_ord.min(o), (total - b_ord).min(c))
        }
    }
}

fn scored<D: Dataset>(model: &Model, data: Option<&D>) -> Vec<(Vec<f64>, usize)> {
    data.map(|d| {
        d.samples()
            .into_iter()
            .map(|(x, y)| {
                let mut s = vec![0.0; model.num_classes()];
                model.scores_into(x, &mut s);
                (s, y)
            })
            .collect()
    })
    .unwrap_or_default()
}

fn validation_score(
    model: &Model,
    scheme: Scheme,
    alpha: f64,
    ord: Option<&LabeledDataset>,
    comp: Option<&CompDataset>,
) -> Result<f64> {
    combined_validation_score(scheme, alpha, &scored(model, ord), &scored(model, comp), model.num_classes())
}

fn check_shapes<D: Dataset>(model: &Model, data: Option<&D>, what: &str) -> Result<()> {
    if let Some(d) = data {
        if d.dim() != model.dim() || d.num_classes() != model.num_classes() {
            return invalid(format!(
                "{what}: data has d={}, K={} but the model has d={}, K={}",
                d.dim(),
                d.num_classes(),
                model.dim(),
                model.num_classes()
            ));
        }
    }
    Ok(())
}

/// Runs `config.iterations` Adam steps on seeded minibatches of the combined
/// objective plus `(λ/2)‖w‖²`, validating every `eval_stride` iterations and
/// keeping the snapshot with the lowest validation score (earliest on ties).
pub fn train(
    init: &Model,
    train_data: Supervision<'_>,
    val_data: Supervision<'_>,
    config: &TrainConfig,
    lambda: f64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be finite and nonnegative, got {lambda}"));
    }
    let alpha = config.alpha;
    let (ord, comp) = train_data.active(alpha, "training data")?;
    let (val_ord, val_comp) = val_data.active(alpha, "validation data")?;
    check_shapes(init, ord, "training data")?;
    check_shapes(init, comp, "training data")?;
    check_shapes(init, val_ord, "validation data")?;
    check_shapes(init, val_comp, "validation data")?;

    let scheme = config.validation_scheme();
    let mut rng = seeded(config.seed);
    let n_ord = ord.map_or(0, Dataset::len);
    let n_comp = comp.map_or(0, Dataset::len);
    let mut ord_sampler = EpochSampler::new(n_ord, &mut rng);
    let mut comp_sampler = EpochSampler::new(n_comp, &mut rng);
    let (b_ord, b_comp) = batch_split(config.batch_size, n_ord, n_comp);

    let mut model = init.clone();
    let mut state = AdamState::new(model.params().len());
    let mut history = Vec::with_capacity(config.iterations / config.eval_stride);
    let mut best: Option<(Model, usize, f64)> = None;
    let (mut ord_idx, mut comp_idx) = (Vec::new(), Vec::new());

    for iteration in 1..=config.iterations {
        ord_sampler.take(b_ord, &mut rng, &mut ord_idx);
        comp_sampler.take(b_comp, &mut rng, &mut comp_idx);
        let batch = Batch {
            ord: ord.map_or_else(Vec::new, |d| ord_idx.iter().map(|&i| (d.features().row(i), d.labels()[i])).collect()),
            comp: comp
                .map_or_else(Vec::new, |d| comp_idx.iter().map(|&i| (d.features().row(i), d.labels()[i])).collect()),
        };
        let (objective, grad) = objective_gradient(&model, &batch, config.spec, alpha, lambda)?;
        adam_step(model.params_mut(), &grad, &mut state, &config.adam)?;
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("parameters diverged at iteration {iteration}")));
        }

        if iteration % config.eval_stride == 0 {
            let score = validation_score(&model, scheme, alpha, val_ord, val_comp)?;
            history.push(HistoryRow { iteration, objective, validation_score: score });
            if best.as_ref().is_none_or(|(_, _, s)| score < *s) {
                best = Some((model.clone(), iteration, score));
            }
        }
    }

    let (best_model, best_iteration, best_score) = best.expect("at least one evaluation");
    Ok(TrainOutcome { best_model, best_iteration, best_score, history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub lambda: f64,
    pub best_score: f64,
    pub best_iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_lambda: f64,
    pub outcome: TrainOutcome,
    /// One row per grid entry, in grid order.
    pub table: Vec<GridRow>,
}

/// Trains once per `λ` (same initialization and seed) and keeps the run with
/// the lowest best-validation score; ties go to the smaller `λ`.
pub fn grid_search(
    lambda_grid: &[f64],
    init: &Model,
    train_data: Supervision<'_>,
    val_data: Supervision<'_>,
    config: &TrainConfig,
) -> Result<GridOutcome> {
    if lambda_grid.is_empty() {
        return invalid("empty lambda grid");
    }
    let mut table = Vec::with_capacity(lambda_grid.len());
    let mut best: Option<(f64, TrainOutcome)> = None;
    for &lambda in lambda_grid {
        let outcome = train(init, train_data, val_data, config, lambda)?;
        table.push(GridRow { lambda, best_score: outcome.best_score, best_iteration: outcome.best_iteration });
        let better = match &best {
            None => true,
            Some((l, o)) => outcome.best_score < o.best_score || (outcome.best_score == o.best_score && lambda < *l),
        };
        if better {
            best = Some((lambda, outcome));
        }
    }
    let (best_lambda, outcome) = best.expect("nonempty grid");
    Ok(GridOutcome { best_lambda, outcome, table })
}

/// Writes `iteration,objective,validation_score` rows.
pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut text = String::from("iteration,objective,validation_score\n");
    for row in history {
        text.push_str(&format!("{},{:?},{:?}\n", row.iteration, row.objective, row.validation_score));
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(io_err)
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(model: &Model, data: &LabeledDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut scores = vec![0.0; model.num_classes()];
    let correct = data
        .samples()
        .into_iter()
        .filter(|&(x, y)| {
            model.scores_into(x, &mut scores);
            crate::models::argmax(&scores) == y
        })
        .count();
    correct as f64 / data.len() as f64
}
