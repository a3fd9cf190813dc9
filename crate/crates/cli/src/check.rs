//! Invariant suite run by `complabel check`.
//!
//! The measurement helpers are public so the acceptance tests can run them
//! at their own sample sizes.

use std::fmt;
use std::time::Instant;

use rand::{Rng, RngExt};

use complabel_core::losses::check_symmetry;
use complabel_core::models::objective_gradient;
use complabel_core::optim::{adam_step, AdamConfig, AdamState};
use complabel_core::risk::{exact_comp_expectation, exact_risk};
use complabel_core::rng::{derive_seed, seeded};
use complabel_core::theory::{estimation_error_bound, uniform_deviation_bound, BoundInputs};
use complabel_core::{
    comp_loss, comp_loss_grad, loss_constants, multiclass_loss, Architecture, Batch, BinaryLossKind, DiscreteJoint,
    LossSpec, Model, Scheme,
};

/// `(M1, M2)` provider, injectable so tests can break it on purpose.
pub type ConstantsFn = fn(Scheme, usize) -> complabel_core::Result<(f64, f64)>;

pub const SYMMETRIC_KINDS: [BinaryLossKind; 3] =
    [BinaryLossKind::Sigmoid, BinaryLossKind::Ramp, BinaryLossKind::ZeroOne];
pub const UNBIASED_SCHEMES: [Scheme; 2] = [Scheme::Ova, Scheme::Pc];

/// Evenly spaced points on `[-limit, limit]`.
pub fn dense_grid(limit: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| -limit + 2.0 * limit * i as f64 / (points - 1) as f64).collect()
}

fn random_scores<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-3.0..3.0)).collect()
}

/// Largest residuals of `Σ_ȳ L̄(g, ȳ) = M1` and `L̄(g, y) + L(g, y) = M2`
/// over `vectors` random score vectors.
pub fn theorem2_residuals<R: Rng + ?Sized>(
    spec: LossSpec,
    k: usize,
    vectors: usize,
    constants: ConstantsFn,
    rng: &mut R,
) -> complabel_core::Result<(f64, f64)> {
    let (m1, m2) = constants(spec.scheme, k)?;
    let (mut sum_res, mut pair_res) = (0.0f64, 0.0f64);
    for _ in 0..vectors {
        let g = random_scores(k, rng);
        let mut total = 0.0;
        for y in 0..k {
            let comp = comp_loss(spec, &g, y)?;
            total += comp;
            pair_res = pair_res.max((comp + multiclass_loss(spec, &g, y)? - m2).abs());
        }
        sum_res = sum_res.max((total - m1).abs());
    }
    Ok((sum_res, pair_res))
}

/// Largest `|(K-1) E_p̄[L̄] - M1 + M2 - R|` over `joints` random discrete
/// joints with random score tables.
pub fn theorem1_gap<R: Rng + ?Sized>(
    spec: LossSpec,
    k: usize,
    joints: usize,
    constants: ConstantsFn,
    rng: &mut R,
) -> complabel_core::Result<f64> {
    let (m1, m2) = constants(spec.scheme, k)?;
    let mut worst = 0.0f64;
    for _ in 0..joints {
        let patterns = rng.random_range(2..=12);
        let joint = DiscreteJoint::random(patterns, k, 2, rng)?;
        let scores: Vec<Vec<f64>> = (0..patterns).map(|_| random_scores(k, rng)).collect();
        let comp = exact_comp_expectation(&joint, &scores, spec)?;
        let risk = exact_risk(&joint, &scores, spec)?;
        worst = worst.max(((k - 1) as f64 * comp - m1 + m2 - risk).abs());
    }
    Ok(worst)
}

/// `|a - b| / max(|a|, |b|, 1e-4)`: relative, except that entries much
/// smaller than the finite-difference noise are compared absolutely.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn near_ramp_kink(spec: LossSpec, g: &[f64]) -> bool {
    let close = |z: f64| (z.abs() - 1.0).abs() < 1e-3;
    match spec.scheme {
        Scheme::Pc => g.iter().any(|a| g.iter().any(|b| close(a - b))),
        _ => g.iter().copied().any(close),
    }
}

/// Largest relative error of `comp_loss_grad` against central differences.
/// Ramp draws are rejected when a margin falls within 1e-3 of a kink.
pub fn loss_gradient_error<R: Rng + ?Sized>(
    spec: LossSpec,
    k: usize,
    vectors: usize,
    rng: &mut R,
) -> complabel_core::Result<f64> {
    const H: f64 = 1e-6;
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < vectors {
        let g = random_scores(k, rng);
        if spec.kind == BinaryLossKind::Ramp && near_ramp_kink(spec, &g) {
            continue;
        }
        done += 1;
        let ybar = rng.random_range(0..k);
        let grad = comp_loss_grad(spec, &g, ybar)?;
        for j in 0..k {
            let (mut up, mut down) = (g.clone(), g.clone());
            up[j] += H;
            down[j] -= H;
            let fd = (comp_loss(spec, &up, ybar)? - comp_loss(spec, &down, ybar)?) / (2.0 * H);
            worst = worst.max(rel_error(grad[j], fd));
        }
    }
    Ok(worst)
}

/// Largest relative error of `objective_gradient` against central
/// differences on random models and minibatches.
pub fn objective_gradient_error<R: Rng + ?Sized>(
    arch: Architecture,
    spec: LossSpec,
    alpha: f64,
    trials: usize,
    rng: &mut R,
) -> complabel_core::Result<f64> {
    const H: f64 = 1e-6;
    let (k, d, lambda) = (4, 3, 0.1);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let model = Model::init(arch, k, d, rng)?;
        let xs: Vec<Vec<f64>> = (0..16).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<usize> = (0..16).map(|_| rng.random_range(0..k)).collect();
        let batch = Batch {
            ord: xs[..8].iter().zip(&labels[..8]).map(|(x, &y)| (x.as_slice(), y)).collect(),
            comp: xs[8..].iter().zip(&labels[8..]).map(|(x, &y)| (x.as_slice(), y)).collect(),
        };
        let (_, grad) = objective_gradient(&model, &batch, spec, alpha, lambda)?;
        let mut probe = model.clone();
        for (j, &g) in grad.iter().enumerate() {
            let base = model.params()[j];
            probe.params_mut()[j] = base + H;
            let up = objective_gradient(&probe, &batch, spec, alpha, lambda)?.0;
            probe.params_mut()[j] = base - H;
            let down = objective_gradient(&probe, &batch, spec, alpha, lambda)?.0;
            probe.params_mut()[j] = base;
            worst = worst.max(rel_error(g, (up - down) / (2.0 * H)));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<20} {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub results: Vec<PropertyResult>,
}

impl CheckReport {
    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.passed).count()
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.name).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn summary(&self) -> String {
        format!(
            "{} properties run, {} passed, {} failed",
            self.results.len(),
            self.passed(),
            self.results.len() - self.passed()
        )
    }
}

pub struct CheckSuite {
    pub constants: ConstantsFn,
    pub seed: u64,
}

impl Default for CheckSuite {
    fn default() -> Self {
        CheckSuite { constants: loss_constants, seed: 0 }
    }
}

type Measured = complabel_core::Result<(bool, String)>;
type Property = (&'static str, fn(&CheckSuite) -> Measured);

impl CheckSuite {
    pub fn run(&self) -> CheckReport {
        let props: [Property; 8] = [
            ("symmetry", Self::symmetry),
            ("theorem2-sum", Self::theorem2_sum),
            ("theorem2-pairing", Self::theorem2_pairing),
            ("theorem1-identity", Self::theorem1_identity),
            ("loss-gradients", Self::loss_gradients),
            ("objective-gradients", Self::objective_gradients),
            ("bound-identities", Self::bound_identities),
            ("adam-reference", Self::adam_reference),
        ];
        let results = props
            .into_iter()
            .map(|(name, f)| {
                let start = Instant::now();
                let (passed, detail) = match f(self) {
                    Ok((passed, detail)) => (passed, format!("{detail} ({:.2?})", start.elapsed())),
                    Err(e) => (false, format!("error: {e}")),
                };
                PropertyResult { name, passed, detail }
            })
            .collect();
        CheckReport { results }
    }

    fn rng(&self, stream: u64) -> complabel_core::rng::Pcg64 {
        seeded(derive_seed(self.seed, stream))
    }

    fn symmetry(&self) -> Measured {
        let grid = dense_grid(20.0, 40_001);
        let smooth = [BinaryLossKind::Sigmoid, BinaryLossKind::Ramp]
            .map(|kind| check_symmetry(kind, &grid))
            .into_iter()
            .fold(0.0, f64::max);
        let off_zero: Vec<f64> = grid.iter().copied().filter(|&z| z != 0.0).collect();
        let zero_one = check_symmetry(BinaryLossKind::ZeroOne, &off_zero);
        let at_zero = check_symmetry(BinaryLossKind::ZeroOne, &[0.0]);
        let ok = smooth < 1e-12 && zero_one == 0.0 && at_zero == 1.0;
        Ok((ok, format!("max residual {smooth:.1e}; zero-one off 0 {zero_one:.1e}, at 0 {at_zero}")))
    }

    fn theorem2(&self, pairing: bool) -> Measured {
        let mut rng = self.rng(2);
        let mut worst = 0.0f64;
        for k in 2..=10 {
            for scheme in UNBIASED_SCHEMES {
                for kind in SYMMETRIC_KINDS {
                    let (sum, pair) =
                        theorem2_residuals(LossSpec::new(scheme, kind)?, k, 200, self.constants, &mut rng)?;
                    worst = worst.max(if pairing { pair } else { sum });
                }
            }
        }
        Ok((worst < 1e-9, format!("max residual {worst:.1e} over K = 2..10")))
    }

    fn theorem2_sum(&self) -> Measured {
        self.theorem2(false)
    }

    fn theorem2_pairing(&self) -> Measured {
        self.theorem2(true)
    }

    fn theorem1_identity(&self) -> Measured {
        let mut rng = self.rng(3);
        let mut worst = 0.0f64;
        for k in 2..=6 {
            for scheme in UNBIASED_SCHEMES {
                for kind in SYMMETRIC_KINDS {
                    worst = worst.max(theorem1_gap(LossSpec::new(scheme, kind)?, k, 20, self.constants, &mut rng)?);
                }
            }
        }
        Ok((worst < 1e-12, format!("max gap {worst:.1e} over K = 2..6")))
    }

    fn loss_gradients(&self) -> Measured {
        let mut rng = self.rng(4);
        let mut worst = 0.0f64;
        for scheme in UNBIASED_SCHEMES {
            for kind in [BinaryLossKind::Sigmoid, BinaryLossKind::Ramp] {
                for k in [2, 3, 5] {
                    worst = worst.max(loss_gradient_error(LossSpec::new(scheme, kind)?, k, 50, &mut rng)?);
                }
            }
        }
        Ok((worst < 1e-5, format!("max relative error {worst:.1e}")))
    }

    fn objective_gradients(&self) -> Measured {
        let mut rng = self.rng(5);
        let mut worst = 0.0f64;
        for arch in [Architecture::Linear, Architecture::Mlp] {
            for scheme in UNBIASED_SCHEMES {
                for alpha in [0.0, 0.5, 1.0] {
                    let spec = LossSpec::new(scheme, BinaryLossKind::Sigmoid)?;
                    worst = worst.max(objective_gradient_error(arch, spec, alpha, 3, &mut rng)?);
                }
            }
        }
        Ok((worst < 1e-4, format!("max relative error {worst:.1e}")))
    }

    fn bound_identities(&self) -> Measured {
        let inputs = BoundInputs { classes: 3, lipschitz: 0.25, rademacher: 0.1, delta: 0.05, n: 100 };
        let c = (2.0f64 / 0.05).ln();
        let expected =
            [(Scheme::Ova, 0.3 + 2.0 * (2.0 * c / 100.0).sqrt()), (Scheme::Pc, 1.2 + 4.0 * (c / 200.0).sqrt())];
        let mut worst = 0.0f64;
        for (scheme, value) in expected {
            let dev = uniform_deviation_bound(scheme, &inputs)?;
            let est = estimation_error_bound(scheme, &inputs)?;
            worst = worst.max((dev - value).abs()).max((est - 2.0 * value).abs());
        }
        let mut rng = self.rng(7);
        let mut factor = 0.0f64;
        for _ in 0..1000 {
            let inputs = BoundInputs {
                classes: rng.random_range(2..20),
                lipschitz: rng.random_range(0.01..5.0),
                rademacher: rng.random_range(0.0..2.0),
                delta: rng.random_range(0.001..0.999),
                n: rng.random_range(1..1_000_000),
            };
            for scheme in UNBIASED_SCHEMES {
                let dev = uniform_deviation_bound(scheme, &inputs)?;
                let est = estimation_error_bound(scheme, &inputs)?;
                factor = factor.max((est - 2.0 * dev).abs() / est);
            }
        }
        Ok((worst < 1e-9 && factor < 1e-12, format!("example error {worst:.1e}, factor-two error {factor:.1e}")))
    }

    fn adam_reference(&self) -> Measured {
        // With zero moments the first bias-corrected step is lr·g/(|g| + ε).
        let cfg = AdamConfig::default();
        let grad = [0.5, -2.0, 1e-3, 0.0];
        let mut params = [1.0, 1.0, 1.0, 1.0];
        let mut state = AdamState::new(params.len());
        adam_step(&mut params, &grad, &mut state, &cfg)?;
        let worst = params
            .iter()
            .zip(grad)
            .map(|(p, g)| (p - (1.0 - cfg.learning_rate * g / (g.abs() + cfg.epsilon))).abs())
            .fold(0.0, f64::max);
        Ok((worst < 1e-12 && state.t == 1, format!("first-step error {worst:.1e}")))
    }
}
