//! Estimation-error bound calculators.
//!
//! The Rademacher complexity of the score-function class cannot be computed
//! in general, so it is an input; [`rademacher_linear`] gives the standard
//! bound for norm-constrained linear models.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::multiclass::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub classes: usize,
    /// Lipschitz constant of the binary loss.
    pub lipschitz: f64,
    /// Rademacher complexity of the per-class score-function class.
    pub rademacher: f64,
    pub delta: f64,
    pub n: u64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return invalid(format!("need K >= 2, got {}", self.classes));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return invalid(format!("Lipschitz constant must be positive, got {}", self.lipschitz));
        }
        if !(self.rademacher >= 0.0 && self.rademacher.is_finite()) {
            return invalid(format!("Rademacher complexity must be nonnegative, got {}", self.rademacher));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.n < 1 {
            return invalid("n must be at least 1");
        }
        Ok(())
    }
}

/// `C_w C_φ / √n`.
pub fn rademacher_linear(c_w: f64, c_phi: f64, n: u64) -> Result<f64> {
    if !(c_w > 0.0 && c_phi > 0.0 && c_w.is_finite() && c_phi.is_finite()) || n == 0 {
        return invalid(format!("need positive C_w, C_phi and n (got {c_w}, {c_phi}, {n})"));
    }
    Ok(c_w * c_phi / (n as f64).sqrt())
}

/// Returns `(complexity factor, confidence term)` such that the bound is
/// `factor · L · 𝔑 + term`.
fn terms(scheme: Scheme, inputs: &BoundInputs) -> Result<(f64, f64)> {
    inputs.validate()?;
    let k = inputs.classes as f64;
    let n = inputs.n as f64;
    let log_term = (2.0 / inputs.delta).ln();
    match scheme {
        Scheme::Ova => Ok((2.0 * k * (k - 1.0), (k - 1.0) * (2.0 * log_term / n).sqrt())),
        Scheme::Pc => Ok((4.0 * k * (k - 1.0).powi(2), (k - 1.0).powi(2) * (log_term / (2.0 * n)).sqrt())),
        Scheme::Ml | Scheme::Pl => invalid(format!("no bound for the {scheme} scheme")),
    }
}

/// Bound on `sup_f |R̂(f) - R(f)|` holding with probability at least `1 - δ`.
///
/// OVA: `2K(K-1) L 𝔑 + (K-1) √(2 ln(2/δ) / n)`;
/// PC: `4K(K-1)² L 𝔑 + (K-1)² √(ln(2/δ) / (2n))`.
pub fn uniform_deviation_bound(scheme: Scheme, inputs: &BoundInputs) -> Result<f64> {
    let (factor, conf) = terms(scheme, inputs)?;
    Ok(factor * inputs.lipschitz * inputs.rademacher + conf)
}

/// Bound on the excess risk `R(f̂) - R(f*)` of the empirical risk minimizer.
///
/// OVA: `4K(K-1) L 𝔑 + (K-1) √(8 ln(2/δ) / n)`;
/// PC: `8K(K-1)² L 𝔑 + (K-1)² √(2 ln(2/δ) / n)`.
pub fn estimation_error_bound(scheme: Scheme, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let k = inputs.classes as f64;
    let n = inputs.n as f64;
    let log_term = (2.0 / inputs.delta).ln();
    let lr = inputs.lipschitz * inputs.rademacher;
    match scheme {
        Scheme::Ova => Ok(4.0 * k * (k - 1.0) * lr + (k - 1.0) * (8.0 * log_term / n).sqrt()),
        Scheme::Pc => Ok(8.0 * k * (k - 1.0).powi(2) * lr + (k - 1.0).powi(2) * (2.0 * log_term / n).sqrt()),
        Scheme::Ml | Scheme::Pl => invalid(format!("no bound for the {scheme} scheme")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn example() -> BoundInputs {
        BoundInputs { classes: 3, lipschitz: 0.25, rademacher: 0.1, delta: 0.05, n: 100 }
    }

    #[test]
    fn rademacher_examples() {
        assert_abs_diff_eq!(rademacher_linear(1.0, 1.0, 100).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rademacher_linear(2.0, 3.0, 36).unwrap(), 1.0, epsilon = 1e-15);
        let a = rademacher_linear(1.5, 2.0, 50).unwrap();
        let b = rademacher_linear(1.5, 2.0, 200).unwrap();
        assert_abs_diff_eq!(b, a / 2.0, epsilon = 1e-15);
        assert!(rademacher_linear(0.0, 1.0, 1).is_err());
        assert!(rademacher_linear(1.0, -1.0, 1).is_err());
        assert!(rademacher_linear(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn worked_examples() {
        // oracle: the formulas evaluated term by term
        let c = (2.0f64 / 0.05).ln();
        let ova_dev = 2.0 * 3.0 * 2.0 * 0.25 * 0.1 + 2.0 * (2.0 * c / 100.0).sqrt();
        let pc_dev = 4.0 * 3.0 * 4.0 * 0.25 * 0.1 + 4.0 * (c / 200.0).sqrt();
        let inputs = example();
        assert_abs_diff_eq!(uniform_deviation_bound(Scheme::Ova, &inputs).unwrap(), ova_dev, epsilon = 1e-12);
        assert_abs_diff_eq!(uniform_deviation_bound(Scheme::Pc, &inputs).unwrap(), pc_dev, epsilon = 1e-12);
        assert_abs_diff_eq!(uniform_deviation_bound(Scheme::Ova, &inputs).unwrap(), 0.84324, epsilon = 1e-5);
        assert_abs_diff_eq!(uniform_deviation_bound(Scheme::Pc, &inputs).unwrap(), 1.74324, epsilon = 1e-5);
        assert_abs_diff_eq!(estimation_error_bound(Scheme::Ova, &inputs).unwrap(), 1.68649, epsilon = 1e-5);
        assert_abs_diff_eq!(estimation_error_bound(Scheme::Pc, &inputs).unwrap(), 3.48649, epsilon = 1e-5);
    }

    #[test]
    fn invalid_inputs() {
        let bad = [
            BoundInputs { classes: 1, ..example() },
            BoundInputs { lipschitz: 0.0, ..example() },
            BoundInputs { rademacher: -0.1, ..example() },
            BoundInputs { delta: 1.0, ..example() },
            BoundInputs { delta: 0.0, ..example() },
            BoundInputs { n: 0, ..example() },
        ];
        for b in bad {
            assert!(uniform_deviation_bound(Scheme::Pc, &b).is_err());
            assert!(estimation_error_bound(Scheme::Ova, &b).is_err());
        }
        assert!(uniform_deviation_bound(Scheme::Ml, &example()).is_err());
    }

    #[test]
    fn monotone_in_n_and_k() {
        for scheme in [Scheme::Ova, Scheme::Pc] {
            let mut prev = f64::INFINITY;
            for n in [10, 100, 1000, 10_000] {
                let b = uniform_deviation_bound(scheme, &BoundInputs { n, ..example() }).unwrap();
                assert!(b < prev);
                prev = b;
            }
            let mut prev = 0.0;
            for classes in 2..10 {
                let b = uniform_deviation_bound(scheme, &BoundInputs { classes, ..example() }).unwrap();
                assert!(b > prev);
                prev = b;
            }
        }
    }

    proptest! {
        #[test]
        fn estimation_bound_is_twice_deviation_bound(
            classes in 2usize..20,
            lipschitz in 0.01f64..5.0,
            rademacher in 0.0f64..2.0,
            delta in 0.001f64..0.999,
            n in 1u64..1_000_000,
        ) {
            let inputs = BoundInputs { classes, lipschitz, rademacher, delta, n };
            for scheme in [Scheme::Ova, Scheme::Pc] {
                let dev = uniform_deviation_bound(scheme, &inputs).unwrap();
                let est = estimation_error_bound(scheme, &inputs).unwrap();
                prop_assert!((est - 2.0 * dev).abs() <= 1e-12 * est.max(1.0));
            }
        }
    }
}
