//! Scalar binary losses `ℓ(z)` used as building blocks of the multiclass losses.
//!
//! Zero-one, sigmoid and ramp satisfy `ℓ(z) + ℓ(-z) = 1`, which is what makes
//! the complementary risk estimator unbiased. The squared hinge is kept only
//! for the partial-label baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryLossKind {
    /// `1` if `z <= 0`, else `0`. Evaluation only.
    ZeroOne,
    /// `1 / (1 + e^z)`.
    Sigmoid,
    /// `½ max(0, min(2, 1 - z))`.
    Ramp,
    /// `max(0, 1 - z)²`. Not symmetric.
    SquaredHinge,
}

impl BinaryLossKind {
    pub const ALL: [BinaryLossKind; 4] =
        [BinaryLossKind::ZeroOne, BinaryLossKind::Sigmoid, BinaryLossKind::Ramp, BinaryLossKind::SquaredHinge];

    pub fn name(self) -> &'static str {
        match self {
            BinaryLossKind::ZeroOne => "zero-one",
            BinaryLossKind::Sigmoid => "sigmoid",
            BinaryLossKind::Ramp => "ramp",
            BinaryLossKind::SquaredHinge => "squared-hinge",
        }
    }

    /// True for the losses satisfying `ℓ(z) + ℓ(-z) = 1`.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, BinaryLossKind::SquaredHinge)
    }

    pub fn is_differentiable(self) -> bool {
        !matches!(self, BinaryLossKind::ZeroOne)
    }

    /// Unchecked evaluation of `ℓ(z)`.
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            BinaryLossKind::ZeroOne => {
                if z > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            BinaryLossKind::Sigmoid => sigmoid_loss(z),
            BinaryLossKind::Ramp => 0.5 * (1.0 - z).clamp(0.0, 2.0),
            BinaryLossKind::SquaredHinge => {
                let m = (1.0 - z).max(0.0);
                m * m
            }
        }
    }

    /// Unchecked derivative `dℓ/dz`. Returns `None` for the zero-one loss.
    #[inline]
    pub fn deriv(self, z: f64) -> Option<f64> {
        match self {
            BinaryLossKind::ZeroOne => None,
            BinaryLossKind::Sigmoid => {
                let s = sigmoid_loss(z);
                Some(-s * (1.0 - s))
            }
            // closed interval: the kinks at ±1 take the middle slope
            BinaryLossKind::Ramp => Some(if (-1.0..=1.0).contains(&z) { -0.5 } else { 0.0 }),
            BinaryLossKind::SquaredHinge => Some(-2.0 * (1.0 - z).max(0.0)),
        }
    }
}

impl fmt::Display for BinaryLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BinaryLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BinaryLossKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidInput(format!("unknown loss `{s}` (expected zero-one, sigmoid, ramp or squared-hinge)"))
        })
    }
}

/// `1 / (1 + e^z)` without overflowing `e^z`.
#[inline]
fn sigmoid_loss(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn ensure_finite(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        invalid(format!("loss argument must be finite, got {z}"))
    }
}

pub fn loss_value(kind: BinaryLossKind, z: f64) -> Result<f64> {
    ensure_finite(z)?;
    Ok(kind.eval(z))
}

/// Derivative of the loss; the ramp returns `-1/2` on `[-1, 1]` and `0` outside.
pub fn loss_grad(kind: BinaryLossKind, z: f64) -> Result<f64> {
    ensure_finite(z)?;
    kind.deriv(z).ok_or(Error::UnsupportedGradient(kind))
}

/// A valid (tight) Lipschitz constant of the loss over the whole real line.
pub fn lipschitz_constant(kind: BinaryLossKind) -> Result<f64> {
    match kind {
        BinaryLossKind::Sigmoid => Ok(0.25),
        BinaryLossKind::Ramp => Ok(0.5),
        BinaryLossKind::ZeroOne => {
            Err(Error::Unsupported("the zero-one loss is discontinuous at 0 and has no Lipschitz constant".into()))
        }
        BinaryLossKind::SquaredHinge => {
            Err(Error::Unsupported("the squared hinge loss is not Lipschitz on the real line".into()))
        }
    }
}

/// Largest `|ℓ(z) + ℓ(-z) - 1|` over the grid (0 for an empty grid).
///
/// The zero-one loss violates the identity at exactly `z = 0`, where both
/// terms equal 1.
pub fn check_symmetry(kind: BinaryLossKind, grid: &[f64]) -> f64 {
    grid.iter().map(|&z| (kind.eval(z) + kind.eval(-z) - 1.0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use BinaryLossKind::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn values() {
        assert_eq!(loss_value(Sigmoid, 0.0).unwrap(), 0.5);
        assert_eq!(loss_value(Ramp, 3.0).unwrap(), 0.0);
        assert_eq!(loss_value(Ramp, -3.0).unwrap(), 1.0);
        assert_eq!(loss_value(ZeroOne, -0.1).unwrap(), 1.0);
        assert_eq!(loss_value(ZeroOne, 0.0).unwrap(), 1.0);
        assert_eq!(loss_value(ZeroOne, 1e-300).unwrap(), 0.0);
        assert_eq!(loss_value(SquaredHinge, 0.5).unwrap(), 0.25);
        assert!(matches!(loss_value(Sigmoid, f64::NAN), Err(Error::InvalidInput(_))));
        assert!(matches!(loss_value(Ramp, f64::INFINITY), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(Sigmoid.eval(1000.0), 0.0);
        assert_eq!(Sigmoid.eval(-1000.0), 1.0);
        assert_eq!(Sigmoid.deriv(1000.0), Some(-0.0));
    }

    #[test]
    fn gradients() {
        assert_abs_diff_eq!(loss_grad(Sigmoid, 0.0).unwrap(), -0.25, epsilon = 1e-15);
        assert_eq!(loss_grad(Ramp, 0.0).unwrap(), -0.5);
        assert_eq!(loss_grad(Ramp, 1.0).unwrap(), -0.5);
        assert_eq!(loss_grad(Ramp, -1.0).unwrap(), -0.5);
        assert_eq!(loss_grad(Ramp, 1.5).unwrap(), 0.0);
        assert_eq!(loss_grad(SquaredHinge, 0.5).unwrap(), -1.0);
        assert!(matches!(loss_grad(ZeroOne, 1.0), Err(Error::UnsupportedGradient(ZeroOne))));
    }

    #[test]
    fn lipschitz() {
        assert_eq!(lipschitz_constant(Sigmoid).unwrap(), 0.25);
        assert_eq!(lipschitz_constant(Ramp).unwrap(), 0.5);
        assert!(matches!(lipschitz_constant(ZeroOne), Err(Error::Unsupported(_))));
        assert!(matches!(lipschitz_constant(SquaredHinge), Err(Error::Unsupported(_))));
    }

    #[test]
    fn symmetry_checks() {
        let g = grid(-5.0, 5.0, 101);
        assert!(check_symmetry(Sigmoid, &g) < 1e-12);
        assert!(check_symmetry(Ramp, &g) < 1e-12);
        assert_eq!(check_symmetry(SquaredHinge, &[0.0]), 1.0);
        assert!(check_symmetry(SquaredHinge, &g) >= 1.0);
        // the single-point exception of the zero-one loss
        assert_eq!(check_symmetry(ZeroOne, &[0.0]), 1.0);
        let no_zero: Vec<f64> = g.iter().copied().filter(|&z| z != 0.0).collect();
        assert_eq!(check_symmetry(ZeroOne, &no_zero), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for k in BinaryLossKind::ALL {
            assert_eq!(k.name().parse::<BinaryLossKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("hinge".parse::<BinaryLossKind>().is_err());
    }

    proptest! {
        #[test]
        fn symmetric_identity(z in -50.0f64..50.0) {
            for k in [Sigmoid, Ramp] {
                prop_assert!((k.eval(z) + k.eval(-z) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn derivative_matches_finite_difference(z in -8.0f64..8.0) {
            let h = 1e-6;
            for k in [Sigmoid, Ramp] {
                if k == Ramp && ((z - 1.0).abs() < 1e-3 || (z + 1.0).abs() < 1e-3) {
                    continue;
                }
                let fd = (k.eval(z + h) - k.eval(z - h)) / (2.0 * h);
                let an = k.deriv(z).unwrap();
                let err = (fd - an).abs() / an.abs().max(1e-8);
                // flat regions: both are (near) zero
                prop_assert!(err < 1e-6 || (an == 0.0 && fd.abs() < 1e-12), "{k} z={z} fd={fd} an={an}");
            }
        }

        #[test]
        fn monotone_non_increasing(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for k in BinaryLossKind::ALL {
                prop_assert!(k.eval(lo) >= k.eval(hi));
            }
        }
    }

    #[test]
    fn lipschitz_holds_on_random_pairs() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_pcg::Pcg64::seed_from_u64(7);
        for k in [Sigmoid, Ramp] {
            let l = lipschitz_constant(k).unwrap();
            for _ in 0..10_000 {
                let a: f64 = rng.random_range(-10.0..10.0);
                let b: f64 = rng.random_range(-10.0..10.0);
                assert!((k.eval(a) - k.eval(b)).abs() <= l * (a - b).abs() + 1e-15);
            }
        }
    }
}
