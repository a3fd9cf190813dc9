//! Score models `x ↦ (g_1(x), …, g_K(x))` over a flat parameter vector.
//!
//! Parameter layout:
//!
//! * linear: weights `K×d` row-major, then the `K` biases;
//! * MLP: one block of `3d + 7` values per class, holding the hidden weights
//!   (`3×d` row-major), hidden biases (3), output weights (3) and output
//!   bias (1) of that class's `d-3-1` ReLU subnetwork.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::multiclass::{complementary_grad, complementary_value, ordinary_grad, ordinary_value, LossSpec};

/// Hidden units per class subnetwork.
pub const HIDDEN_UNITS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Linear,
    Mlp,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp => "mlp",
        }
    }

    /// Number of parameters for `k` classes in dimension `d`.
    pub fn num_params(self, k: usize, d: usize) -> usize {
        match self {
            Architecture::Linear => k * (d + 1),
            Architecture::Mlp => k * mlp_block(d),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Architecture::Linear),
            "mlp" => Ok(Architecture::Mlp),
            _ => invalid(format!("unknown model `{s}` (expected linear or mlp)")),
        }
    }
}

const fn mlp_block(d: usize) -> usize {
    HIDDEN_UNITS * d + 2 * HIDDEN_UNITS + 1
}

/// A model: architecture, shape and its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    classes: usize,
    dim: usize,
    params: Vec<f64>,
}

impl Model {
    pub fn zeros(arch: Architecture, classes: usize, dim: usize) -> Result<Self> {
        Model::from_params(arch, classes, dim, vec![0.0; arch.num_params(classes, dim)])
    }

    pub fn from_params(arch: Architecture, classes: usize, dim: usize, params: Vec<f64>) -> Result<Self> {
        if classes < 2 || dim < 1 {
            return invalid(format!("a model needs K >= 2 and d >= 1, got K={classes}, d={dim}"));
        }
        if params.len() != arch.num_params(classes, dim) {
            return invalid(format!(
                "{arch} model with K={classes}, d={dim} has {} parameters, got {}",
                arch.num_params(classes, dim),
                params.len()
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return invalid("model parameters must be finite");
        }
        Ok(Model { arch, classes, dim, params })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, classes: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let mut model = Model::zeros(arch, classes, dim)?;
        for i in 0..model.params.len() {
            if let Some(fan_in) = model.fan_in(i) {
                let bound = 1.0 / (fan_in as f64).sqrt();
                model.params[i] = rng.random_range(-bound..=bound);
            }
        }
        Ok(model)
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// Fan-in of the weight at flat index `i`, or `None` for a bias.
    fn fan_in(&self, i: usize) -> Option<usize> {
        match self.arch {
            Architecture::Linear => (i < self.classes * self.dim).then_some(self.dim),
            Architecture::Mlp => {
                let off = i % mlp_block(self.dim);
                let hidden_w = HIDDEN_UNITS * self.dim;
                if off < hidden_w {
                    Some(self.dim)
                } else if (hidden_w + HIDDEN_UNITS..hidden_w + 2 * HIDDEN_UNITS).contains(&off) {
                    Some(HIDDEN_UNITS)
                } else {
                    None
                }
            }
        }
    }

    /// True for parameters covered by the L2 penalty (weights, not biases).
    pub fn is_weight(&self, i: usize) -> bool {
        self.fan_in(i).is_some()
    }

    /// `½ Σ w²` over weights only.
    pub fn half_sq_weight_norm(&self) -> f64 {
        self.params.iter().enumerate().filter(|&(i, _)| self.is_weight(i)).map(|(_, w)| 0.5 * w * w).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return invalid(format!("expected {} features, got {}", self.dim, x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("features must be finite");
        }
        Ok(())
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.classes];
        self.scores_into(x, &mut out);
        Ok(out)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Unchecked forward pass; `x.len() == d`, `out.len() == K`.
    pub fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match self.arch {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(self.classes * d);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = dot(&w[k * d..(k + 1) * d], x) + b[k];
                }
            }
            Architecture::Mlp => {
                for (block, o) in self.params.chunks_exact(mlp_block(d)).zip(out.iter_mut()) {
                    let unit = MlpView::new(block, d);
                    let mut s = unit.output_bias;
                    for h in 0..HIDDEN_UNITS {
                        s += unit.output_weights[h] * unit.pre_activation(h, x).max(0.0);
                    }
                    *o = s;
                }
            }
        }
    }

    /// Adds `Σ_k dscores[k] · ∂g_k(x)/∂θ` into `grad`.
    fn backprop(&self, x: &[f64], dscores: &[f64], grad: &mut [f64]) {
        let d = self.dim;
        match self.arch {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(self.classes * d);
                for (k, &ds) in dscores.iter().enumerate() {
                    if ds == 0.0 {
                        continue;
                    }
                    for (g, xi) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *g += ds * xi;
                    }
                    gb[k] += ds;
                }
            }
            Architecture::Mlp => {
                let block_len = mlp_block(d);
                for ((block, gblock), &ds) in
                    self.params.chunks_exact(block_len).zip(grad.chunks_exact_mut(block_len)).zip(dscores)
                {
                    if ds == 0.0 {
                        continue;
                    }
                    let unit = MlpView::new(block, d);
                    let hw = HIDDEN_UNITS * d;
                    for h in 0..HIDDEN_UNITS {
                        let pre = unit.pre_activation(h, x);
                        // output weight sees the activation
                        gblock[hw + HIDDEN_UNITS + h] += ds * pre.max(0.0);
                        // ReLU subgradient at 0 is 0
                        if pre > 0.0 {
                            let dh = ds * unit.output_weights[h];
                            for (g, xi) in gblock[h * d..(h + 1) * d].iter_mut().zip(x) {
                                *g += dh * xi;
                            }
                            gblock[hw + h] += dh;
                        }
                    }
                    gblock[block_len - 1] += ds;
                }
            }
        }
    }
}

struct MlpView<'a> {
    hidden_weights: &'a [f64],
    hidden_biases: &'a [f64],
    output_weights: &'a [f64],
    output_bias: f64,
    dim: usize,
}

impl<'a> MlpView<'a> {
    fn new(block: &'a [f64], dim: usize) -> Self {
        let (hidden_weights, rest) = block.split_at(HIDDEN_UNITS * dim);
        let (hidden_biases, rest) = rest.split_at(HIDDEN_UNITS);
        let (output_weights, rest) = rest.split_at(HIDDEN_UNITS);
        MlpView { hidden_weights, hidden_biases, output_weights, output_bias: rest[0], dim }
    }

    #[inline]
    fn pre_activation(&self, h: usize, x: &[f64]) -> f64 {
        dot(&self.hidden_weights[h * self.dim..(h + 1) * self.dim], x) + self.hidden_biases[h]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest score; ties go to the smallest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Structured form of a linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `K` rows of `d` weights.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// One class's `d-3-1` subnetwork.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpUnit {
    /// `3` rows of `d` weights.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_biases: [f64; HIDDEN_UNITS],
    pub output_weights: [f64; HIDDEN_UNITS],
    pub output_bias: f64,
}

/// Structured form of an MLP: one subnetwork per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub units: Vec<MlpUnit>,
}

impl TryFrom<LinearModel> for Model {
    type Error = Error;

    fn try_from(m: LinearModel) -> Result<Self> {
        let k = m.weights.len();
        let d = m.weights.first().map_or(0, Vec::len);
        if m.biases.len() != k || m.weights.iter().any(|r| r.len() != d) {
            return invalid("ragged linear model");
        }
        let mut params: Vec<f64> = m.weights.into_iter().flatten().collect();
        params.extend(m.biases);
        Model::from_params(Architecture::Linear, k, d, params)
    }
}

impl TryFrom<MlpModel> for Model {
    type Error = Error;

    fn try_from(m: MlpModel) -> Result<Self> {
        let k = m.units.len();
        let d = m.units.first().and_then(|u| u.hidden_weights.first()).map_or(0, Vec::len);
        let mut params = Vec::with_capacity(k * mlp_block(d));
        for unit in m.units {
            if unit.hidden_weights.len() != HIDDEN_UNITS || unit.hidden_weights.iter().any(|r| r.len() != d) {
                return invalid("ragged MLP unit");
            }
            params.extend(unit.hidden_weights.into_iter().flatten());
            params.extend(unit.hidden_biases);
            params.extend(unit.output_weights);
            params.push(unit.output_bias);
        }
        Model::from_params(Architecture::Mlp, k, d, params)
    }
}

impl Model {
    pub fn to_linear(&self) -> Option<LinearModel> {
        (self.arch == Architecture::Linear).then(|| {
            let (w, b) = self.params.split_at(self.classes * self.dim);
            LinearModel { weights: w.chunks_exact(self.dim).map(<[f64]>::to_vec).collect(), biases: b.to_vec() }
        })
    }

    pub fn to_mlp(&self) -> Option<MlpModel> {
        (self.arch == Architecture::Mlp).then(|| MlpModel {
            units: self
                .params
                .chunks_exact(mlp_block(self.dim))
                .map(|block| {
                    let v = MlpView::new(block, self.dim);
                    MlpUnit {
                        hidden_weights: v.hidden_weights.chunks_exact(self.dim).map(<[f64]>::to_vec).collect(),
                        hidden_biases: v.hidden_biases.try_into().unwrap(),
                        output_weights: v.output_weights.try_into().unwrap(),
                        output_bias: v.output_bias,
                    }
                })
                .collect(),
        })
    }
}

/// A minibatch of ordinarily and complementarily labeled patterns.
#[derive(Debug, Clone, Default)]
pub struct Batch<'a> {
    pub ord: Vec<(&'a [f64], usize)>,
    pub comp: Vec<(&'a [f64], usize)>,
}

/// Value and gradient of
/// `α/m Σ L(g(x), y) + (1-α)(K-1)/n Σ L̄(g(x), ȳ) + (λ/2)‖w‖²`,
/// with the L2 term over weights only.
///
/// For the ML and PL baselines `L̄` is the baseline loss and `α` must be 0.
pub fn objective_gradient(
    model: &Model,
    batch: &Batch<'_>,
    spec: LossSpec,
    alpha: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    if !spec.kind.is_differentiable() {
        return Err(Error::UnsupportedGradient(spec.kind));
    }
    if alpha > 0.0 && !spec.scheme.is_unbiased() {
        return invalid(format!("the {} scheme cannot use ordinary labels", spec.scheme));
    }
    if alpha > 0.0 && batch.ord.is_empty() || alpha < 1.0 && batch.comp.is_empty() {
        return invalid("batch is missing samples for a term with nonzero weight");
    }
    let k = model.classes;
    let mut grad = vec![0.0; model.params.len()];
    let mut scores = vec![0.0; k];
    let mut dscores = vec![0.0; k];
    let mut value = 0.0;

    let mut term = |samples: &[(&[f64], usize)], coef: f64, ordinary: bool| -> Result<f64> {
        let mut total = 0.0;
        for &(x, label) in samples {
            model.check_input(x)?;
            if label >= k {
                return invalid(format!("label {label} out of range for {k} classes"));
            }
            model.scores_into(x, &mut scores);
            dscores.iter_mut().for_each(|v| *v = 0.0);
            if ordinary {
                total += ordinary_value(spec, &scores, label);
                ordinary_grad(spec, &scores, label, coef, &mut dscores)?;
            } else {
                total += complementary_value(spec, &scores, label);
                complementary_grad(spec, &scores, label, coef, &mut dscores)?;
            }
            model.backprop(x, &dscores, &mut grad);
        }
        Ok(total * coef)
    };

    if alpha > 0.0 {
        value += term(&batch.ord, alpha / batch.ord.len() as f64, true)?;
    }
    if alpha < 1.0 {
        let coef = (1.0 - alpha) * (k - 1) as f64 / batch.comp.len() as f64;
        value += term(&batch.comp, coef, false)?;
    }
    if lambda != 0.0 {
        value += lambda * model.half_sq_weight_norm();
        for (i, (g, p)) in grad.iter_mut().zip(&model.params).enumerate() {
            if model.is_weight(i) {
                *g += lambda * p;
            }
        }
    }
    Ok((value, grad))
}

/// Writes a parameter file: a `model_type,classes,dim,seed` header record,
/// then an `index,value` table with one row per flat parameter.
pub fn write_params(path: &Path, model: &Model, seed: u64) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let mut text =
        format!("model_type,classes,dim,seed\n{},{},{},{}\nindex,value\n", model.arch, model.classes, model.dim, seed);
    for (i, p) in model.params.iter().enumerate() {
        // `{:?}` prints the shortest representation that round-trips exactly
        text.push_str(&format!("{i},{p:?}\n"));
    }
    out.write_all(text.as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Reads a file produced by [`write_params`], returning the model and its seed.
pub fn read_params(path: &Path) -> Result<(Model, u64)> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let parse_err = |row: usize, message: String| Error::Parse { path: path.to_path_buf(), row, message };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines();
    let mut next = |what: &str| -> Result<String> {
        lines.next().transpose().map_err(io_err)?.ok_or_else(|| parse_err(0, format!("missing {what}")))
    };
    if next("header")?.trim() != "model_type,classes,dim,seed" {
        return Err(parse_err(0, "bad header".into()));
    }
    let meta = next("model record")?;
    let fields: Vec<&str> = meta.trim().split(',').collect();
    let [arch, classes, dim, seed] = fields[..] else {
        return Err(parse_err(0, format!("bad model record `{meta}`")));
    };
    let num = |s: &str| s.parse::<u64>().map_err(|e| parse_err(0, format!("`{s}`: {e}")));
    let arch: Architecture = arch.parse()?;
    let (classes, dim, seed) = (num(classes)? as usize, num(dim)? as usize, num(seed)?);
    if next("table header")?.trim() != "index,value" {
        return Err(parse_err(0, "missing index,value table".into()));
    }
    let mut params = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let (idx, val) = line.trim().split_once(',').ok_or_else(|| parse_err(row + 1, format!("bad row `{line}`")))?;
        if idx.parse::<usize>().ok() != Some(params.len()) {
            return Err(parse_err(row + 1, format!("expected index {}, got `{idx}`", params.len())));
        }
        params.push(val.parse::<f64>().map_err(|e| parse_err(row + 1, format!("`{val}`: {e}")))?);
    }
    Ok((Model::from_params(arch, classes, dim, params)?, seed))
}
