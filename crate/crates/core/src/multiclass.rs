//! Multiclass losses built from a binary loss over per-class scores.
//!
//! Class indices are 0-based here; 1-based labels only appear at the CSV and
//! CLI boundaries.
//!
//! * ordinary losses `L(g, y)` for OVA and PC,
//! * complementary losses `L̄(g, ȳ)` for OVA and PC,
//! * the ML and PL baselines, which also consume a complementary label,
//! * analytic gradients of all of the above with respect to the scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::losses::BinaryLossKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// One-versus-all.
    Ova,
    /// Pairwise comparison.
    Pc,
    /// Multi-label baseline: every complementary label is a negative label.
    Ml,
    /// Partial-label baseline with the squared hinge loss.
    Pl,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ova, Scheme::Pc, Scheme::Ml, Scheme::Pl];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ova => "ova",
            Scheme::Pc => "pc",
            Scheme::Ml => "ml",
            Scheme::Pl => "pl",
        }
    }

    /// OVA and PC have an unbiased complementary risk; ML and PL do not.
    pub fn is_unbiased(self) -> bool {
        matches!(self, Scheme::Ova | Scheme::Pc)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}` (expected ova, pc, ml or pl)")))
    }
}

/// A multiclass loss: a scheme paired with a binary loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLossSpec")]
pub struct LossSpec {
    pub scheme: Scheme,
    pub kind: BinaryLossKind,
}

#[derive(Deserialize)]
struct RawLossSpec {
    scheme: Scheme,
    kind: BinaryLossKind,
}

impl TryFrom<RawLossSpec> for LossSpec {
    type Error = Error;

    fn try_from(raw: RawLossSpec) -> Result<Self> {
        LossSpec::new(raw.scheme, raw.kind)
    }
}

impl LossSpec {
    /// The partial-label scheme only accepts the squared hinge loss.
    pub fn new(scheme: Scheme, kind: BinaryLossKind) -> Result<Self> {
        if scheme == Scheme::Pl && kind != BinaryLossKind::SquaredHinge {
            return invalid(format!("the pl scheme requires the squared-hinge loss, got {kind}"));
        }
        Ok(LossSpec { scheme, kind })
    }

    pub const fn ova(kind: BinaryLossKind) -> Self {
        LossSpec { scheme: Scheme::Ova, kind }
    }

    pub const fn pc(kind: BinaryLossKind) -> Self {
        LossSpec { scheme: Scheme::Pc, kind }
    }

    pub const fn ml(kind: BinaryLossKind) -> Self {
        LossSpec { scheme: Scheme::Ml, kind }
    }

    pub const fn pl() -> Self {
        LossSpec { scheme: Scheme::Pl, kind: BinaryLossKind::SquaredHinge }
    }

    /// Same scheme with the zero-one loss plugged in.
    pub fn zero_one(self) -> Self {
        LossSpec { scheme: self.scheme, kind: BinaryLossKind::ZeroOne }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scheme, self.kind)
    }
}

/// Parses `scheme/loss`, e.g. `pc/sigmoid`. A bare `pl` means `pl/squared-hinge`.
impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((scheme, kind)) => LossSpec::new(scheme.parse()?, kind.parse()?),
            None if s == "pl" => Ok(LossSpec::pl()),
            None => invalid(format!("expected `scheme/loss`, got `{s}`")),
        }
    }
}

pub(crate) fn check_scores(scores: &[f64], label: usize) -> Result<()> {
    if scores.len() < 2 {
        return invalid(format!("score vector needs at least 2 classes, got {}", scores.len()));
    }
    if label >= scores.len() {
        return invalid(format!("class index {label} out of range for {} classes", scores.len()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return invalid(format!("scores must be finite, got {bad}"));
    }
    Ok(())
}

fn require_unbiased(spec: LossSpec) -> Result<()> {
    if spec.scheme.is_unbiased() {
        Ok(())
    } else {
        invalid(format!("{} is a baseline scheme; expected ova or pc", spec.scheme))
    }
}

fn require_baseline(spec: LossSpec) -> Result<()> {
    if spec.scheme.is_unbiased() {
        invalid(format!("{} is not a baseline scheme; expected ml or pl", spec.scheme))
    } else {
        Ok(())
    }
}

/// Ordinary loss `L(g, y)`.
pub fn multiclass_loss(spec: LossSpec, scores: &[f64], y: usize) -> Result<f64> {
    require_unbiased(spec)?;
    check_scores(scores, y)?;
    Ok(ordinary_value(spec, scores, y))
}

/// Complementary loss `L̄(g, ȳ)` for OVA and PC.
pub fn comp_loss(spec: LossSpec, scores: &[f64], ybar: usize) -> Result<f64> {
    require_unbiased(spec)?;
    check_scores(scores, ybar)?;
    Ok(complementary_value(spec, scores, ybar))
}

/// ML and PL baseline losses for a complementary label.
pub fn baseline_loss(spec: LossSpec, scores: &[f64], ybar: usize) -> Result<f64> {
    require_baseline(spec)?;
    check_scores(scores, ybar)?;
    Ok(complementary_value(spec, scores, ybar))
}

/// `(M1, M2)`: the sum of complementary losses over all `ȳ`, and the value of
/// `L̄(g, y) + L(g, y)`, both constant when the binary loss is symmetric.
pub fn loss_constants(scheme: Scheme, k: usize) -> Result<(f64, f64)> {
    if k < 2 {
        return invalid(format!("need at least 2 classes, got {k}"));
    }
    let kf = k as f64;
    match scheme {
        Scheme::Ova => Ok((kf, 2.0)),
        Scheme::Pc => Ok((kf * (kf - 1.0) / 2.0, kf - 1.0)),
        Scheme::Ml | Scheme::Pl => invalid(format!("no loss constants for the {scheme} scheme")),
    }
}

/// Gradient of the complementary (or baseline) loss with respect to the scores.
pub fn comp_loss_grad(spec: LossSpec, scores: &[f64], ybar: usize) -> Result<Vec<f64>> {
    check_scores(scores, ybar)?;
    let mut grad = vec![0.0; scores.len()];
    complementary_grad(spec, scores, ybar, 1.0, &mut grad)?;
    Ok(grad)
}

/// Gradient of the ordinary loss with respect to the scores.
pub fn multiclass_loss_grad(spec: LossSpec, scores: &[f64], y: usize) -> Result<Vec<f64>> {
    require_unbiased(spec)?;
    check_scores(scores, y)?;
    let mut grad = vec![0.0; scores.len()];
    ordinary_grad(spec, scores, y, 1.0, &mut grad)?;
    Ok(grad)
}

// Unchecked kernels shared with the risk estimators and the training loop.

pub(crate) fn ordinary_value(spec: LossSpec, g: &[f64], y: usize) -> f64 {
    let l = spec.kind;
    let others = g.iter().enumerate().filter(|&(j, _)| j != y);
    match spec.scheme {
        Scheme::Ova => {
            let rest: f64 = others.map(|(_, &gj)| l.eval(-gj)).sum();
            l.eval(g[y]) + rest / (g.len() - 1) as f64
        }
        Scheme::Pc => others.map(|(_, &gj)| l.eval(g[y] - gj)).sum(),
        Scheme::Ml | Scheme::Pl => unreachable!("baseline schemes have no ordinary loss"),
    }
}

pub(crate) fn complementary_value(spec: LossSpec, g: &[f64], ybar: usize) -> f64 {
    let l = spec.kind;
    let others = g.iter().enumerate().filter(|&(j, _)| j != ybar);
    match spec.scheme {
        Scheme::Ova => {
            let rest: f64 = others.map(|(_, &gj)| l.eval(gj)).sum();
            rest / (g.len() - 1) as f64 + l.eval(-g[ybar])
        }
        Scheme::Pc => others.map(|(_, &gj)| l.eval(gj - g[ybar])).sum(),
        Scheme::Ml => others.map(|(_, &gj)| l.eval(gj)).sum::<f64>() + l.eval(-g[ybar]),
        Scheme::Pl => {
            let mean = others.map(|(_, &gj)| gj).sum::<f64>() / (g.len() - 1) as f64;
            l.eval(mean) + l.eval(-g[ybar])
        }
    }
}

fn deriv(kind: BinaryLossKind, z: f64) -> Result<f64> {
    kind.deriv(z).ok_or(Error::UnsupportedGradient(kind))
}

/// Adds `scale · ∂L̄/∂g` into `out`.
pub(crate) fn complementary_grad(spec: LossSpec, g: &[f64], ybar: usize, scale: f64, out: &mut [f64]) -> Result<()> {
    let l = spec.kind;
    let k = g.len();
    match spec.scheme {
        Scheme::Ova | Scheme::Ml => {
            let rest_scale = if spec.scheme == Scheme::Ova { scale / (k - 1) as f64 } else { scale };
            for j in (0..k).filter(|&j| j != ybar) {
                out[j] += rest_scale * deriv(l, g[j])?;
            }
            out[ybar] -= scale * deriv(l, -g[ybar])?;
        }
        Scheme::Pc => {
            for j in (0..k).filter(|&j| j != ybar) {
                let d = scale * deriv(l, g[j] - g[ybar])?;
                out[j] += d;
                out[ybar] -= d;
            }
        }
        Scheme::Pl => {
            let n_cand = (k - 1) as f64;
            let mean = (0..k).filter(|&j| j != ybar).map(|j| g[j]).sum::<f64>() / n_cand;
            let d = scale * deriv(l, mean)? / n_cand;
            for j in (0..k).filter(|&j| j != ybar) {
                out[j] += d;
            }
            out[ybar] -= scale * deriv(l, -g[ybar])?;
        }
    }
    Ok(())
}

/// Adds `scale · ∂L/∂g` into `out`.
pub(crate) fn ordinary_grad(spec: LossSpec, g: &[f64], y: usize, scale: f64, out: &mut [f64]) -> Result<()> {
    let l = spec.kind;
    let k = g.len();
    match spec.scheme {
        Scheme::Ova => {
            out[y] += scale * deriv(l, g[y])?;
            let rest_scale = scale / (k - 1) as f64;
            for j in (0..k).filter(|&j| j != y) {
                out[j] -= rest_scale * deriv(l, -g[j])?;
            }
        }
        Scheme::Pc => {
            for j in (0..k).filter(|&j| j != y) {
                let d = scale * deriv(l, g[y] - g[j])?;
                out[y] += d;
                out[j] -= d;
            }
        }
        Scheme::Ml | Scheme::Pl => {
            return invalid(format!("the {} scheme has no ordinary loss", spec.scheme));
        }
    }
    Ok(())
}
