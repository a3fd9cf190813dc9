//! Empirical risk estimators and exact expectations over small discrete
//! distributions.

use rand::{Rng, RngExt};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::multiclass::{check_scores, complementary_value, loss_constants, ordinary_value, LossSpec};

/// Largest number of (pattern, class) cells an exact oracle will accept.
pub const MAX_ORACLE_CELLS: usize = 1000;

/// An empirical risk value together with the sample it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub n_comp: usize,
    pub n_ord: usize,
    pub spec: LossSpec,
    /// Weight of the ordinary term; 0 for a purely complementary estimate.
    pub alpha: f64,
    /// Whether `-M1 + M2` has been added to the complementary term.
    pub includes_constants: bool,
}

fn check_samples<S: AsRef<[f64]>>(samples: &[(S, usize)], k: usize) -> Result<()> {
    for (i, (scores, label)) in samples.iter().enumerate() {
        let scores = scores.as_ref();
        if scores.len() != k {
            return invalid(format!("sample {i}: expected {k} scores, got {}", scores.len()));
        }
        check_scores(scores, *label).map_err(|e| crate::Error::InvalidInput(format!("sample {i}: {e}")))?;
    }
    Ok(())
}

fn mean_comp_loss<S: AsRef<[f64]>>(spec: LossSpec, samples: &[(S, usize)]) -> f64 {
    samples.iter().map(|(g, ybar)| complementary_value(spec, g.as_ref(), *ybar)).sum::<f64>() / samples.len() as f64
}

fn mean_ordinary_loss<S: AsRef<[f64]>>(spec: LossSpec, samples: &[(S, usize)]) -> f64 {
    samples.iter().map(|(g, y)| ordinary_value(spec, g.as_ref(), *y)).sum::<f64>() / samples.len() as f64
}

/// `(K-1)/n Σ L̄(g_i, ȳ_i) - M1 + M2`, an unbiased estimate of the ordinary
/// risk when the binary loss is symmetric.
pub fn empirical_comp_risk<S: AsRef<[f64]>>(spec: LossSpec, samples: &[(S, usize)], k: usize) -> Result<RiskEstimate> {
    let (m1, m2) = loss_constants(spec.scheme, k)?;
    if samples.is_empty() {
        return invalid("empirical complementary risk needs at least one sample");
    }
    check_samples(samples, k)?;
    Ok(RiskEstimate {
        value: (k - 1) as f64 * mean_comp_loss(spec, samples) - m1 + m2,
        n_comp: samples.len(),
        n_ord: 0,
        spec,
        alpha: 0.0,
        includes_constants: true,
    })
}

/// Mean ordinary multiclass loss.
pub fn empirical_ordinary_risk<S: AsRef<[f64]>>(spec: LossSpec, samples: &[(S, usize)]) -> Result<RiskEstimate> {
    if !spec.scheme.is_unbiased() {
        return invalid(format!("the {} scheme has no ordinary loss", spec.scheme));
    }
    let Some((first, _)) = samples.first() else {
        return invalid("empirical ordinary risk needs at least one sample");
    };
    check_samples(samples, first.as_ref().len())?;
    Ok(RiskEstimate {
        value: mean_ordinary_loss(spec, samples),
        n_comp: 0,
        n_ord: samples.len(),
        spec,
        alpha: 1.0,
        includes_constants: false,
    })
}

/// Convex combination of the ordinary and complementary empirical risks:
/// `α/m Σ L + (1-α)(K-1)/n Σ L̄`, plus `(1-α)(-M1 + M2)` when
/// `include_constants` is set.
///
/// A sample set may be empty only when its coefficient is zero.
pub fn combined_objective<S: AsRef<[f64]>, T: AsRef<[f64]>>(
    alpha: f64,
    ord: &[(S, usize)],
    comp: &[(T, usize)],
    spec: LossSpec,
    k: usize,
    include_constants: bool,
) -> Result<RiskEstimate> {
    if !(0.0..=1.0).contains(&alpha) {
        return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    let (m1, m2) = loss_constants(spec.scheme, k)?;
    let mut value = 0.0;
    if alpha > 0.0 {
        if ord.is_empty() {
            return invalid("alpha > 0 requires ordinarily labeled samples");
        }
        check_samples(ord, k)?;
        value += alpha * mean_ordinary_loss(spec, ord);
    }
    if alpha < 1.0 {
        if comp.is_empty() {
            return invalid("alpha < 1 requires complementarily labeled samples");
        }
        check_samples(comp, k)?;
        value += (1.0 - alpha) * (k - 1) as f64 * mean_comp_loss(spec, comp);
        if include_constants {
            value += (1.0 - alpha) * (m2 - m1);
        }
    }
    Ok(RiskEstimate {
        value,
        n_comp: if alpha < 1.0 { comp.len() } else { 0 },
        n_ord: if alpha > 0.0 { ord.len() } else { 0 },
        spec,
        alpha,
        includes_constants: include_constants,
    })
}

/// The complementary risk estimate with the zero-one loss plugged into the
/// given scheme. Needs no ordinary labels, so it serves as a validation score.
pub fn validation_score<S: AsRef<[f64]>>(scheme: crate::Scheme, samples: &[(S, usize)], k: usize) -> Result<f64> {
    let spec = LossSpec { scheme, kind: crate::BinaryLossKind::ZeroOne };
    empirical_comp_risk(spec, samples, k).map(|r| r.value)
}

/// Zero-one version of [`combined_objective`] (with constants), used to
/// validate models trained on mixed supervision.
pub fn combined_validation_score<S: AsRef<[f64]>, T: AsRef<[f64]>>(
    scheme: crate::Scheme,
    alpha: f64,
    ord: &[(S, usize)],
    comp: &[(T, usize)],
    k: usize,
) -> Result<f64> {
    let spec = LossSpec { scheme, kind: crate::BinaryLossKind::ZeroOne };
    combined_objective(alpha, ord, comp, spec, k, true).map(|r| r.value)
}

/// A joint distribution over finitely many patterns and `K` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    patterns: Vec<Vec<f64>>,
    pattern_probs: Vec<f64>,
    class_probs: Vec<Vec<f64>>,
}

const PROB_TOL: f64 = 1e-9;

impl DiscreteJoint {
    /// `class_probs[i]` is `p(y | x_i)`; `pattern_probs[i]` is `p(x_i)`.
    pub fn new(patterns: Vec<Vec<f64>>, pattern_probs: Vec<f64>, class_probs: Vec<Vec<f64>>) -> Result<Self> {
        let n = patterns.len();
        if n == 0 || pattern_probs.len() != n || class_probs.len() != n {
            return invalid(
                "patterns, pattern probabilities and class probabilities must be nonempty and of equal length",
            );
        }
        let k = class_probs[0].len();
        if k < 2 {
            return invalid("a joint needs at least 2 classes");
        }
        if n * k > MAX_ORACLE_CELLS {
            return invalid(format!("{n} patterns x {k} classes exceeds the {MAX_ORACLE_CELLS}-cell oracle limit"));
        }
        let valid = |p: &f64| p.is_finite() && *p >= 0.0;
        if !pattern_probs.iter().all(valid) || (pattern_probs.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
            return invalid("pattern probabilities must be nonnegative and sum to 1");
        }
        for (i, row) in class_probs.iter().enumerate() {
            if row.len() != k || !row.iter().all(valid) || (row.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                return invalid(format!(
                    "class probabilities of pattern {i} must be {k} nonnegative values summing to 1"
                ));
            }
        }
        Ok(DiscreteJoint { patterns, pattern_probs, class_probs })
    }

    /// Random joint with flat-Dirichlet probability rows and patterns drawn
    /// uniformly from `[-1, 1]^d`.
    pub fn random<R: Rng + ?Sized>(n_patterns: usize, k: usize, d: usize, rng: &mut R) -> Result<Self> {
        let mut simplex = |len: usize| {
            let raw: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect::<Vec<_>>()
        };
        let pattern_probs = simplex(n_patterns);
        let class_probs = (0..n_patterns).map(|_| simplex(k)).collect();
        let patterns = (0..n_patterns).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        DiscreteJoint::new(patterns, pattern_probs, class_probs)
    }

    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_probs[0].len()
    }

    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    /// `p(x_i, y)`.
    pub fn prob(&self, i: usize, y: usize) -> f64 {
        self.pattern_probs[i] * self.class_probs[i][y]
    }

    /// `p̄(x_i, ȳ) = 1/(K-1) Σ_{y≠ȳ} p(x_i, y)`.
    pub fn comp_prob(&self, i: usize, ybar: usize) -> f64 {
        let k = self.num_classes();
        let others: f64 = (0..k).filter(|&y| y != ybar).map(|y| self.prob(i, y)).sum();
        others / (k - 1) as f64
    }

    /// Draws `n` (pattern index, complementary label) pairs from `p̄`.
    pub fn sample_complementary<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
        let k = self.num_classes();
        let mut cdf = Vec::with_capacity(self.num_patterns() * k);
        let mut acc = 0.0;
        for i in 0..self.num_patterns() {
            for ybar in 0..k {
                acc += self.comp_prob(i, ybar);
                cdf.push(acc);
            }
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                (cell / k, cell % k)
            })
            .collect()
    }

    fn check_scores<S: AsRef<[f64]>>(&self, scores: &[S]) -> Result<()> {
        if scores.len() != self.num_patterns() {
            return invalid(format!(
                "expected one score vector per pattern ({}), got {}",
                self.num_patterns(),
                scores.len()
            ));
        }
        check_samples(&scores.iter().map(|s| (s.as_ref(), 0)).collect::<Vec<_>>(), self.num_classes())
    }
}

/// `Σ_x Σ_y p(x, y) L(g(x), y)`, with `scores[i]` the model output at pattern `i`.
pub fn exact_risk<S: AsRef<[f64]>>(joint: &DiscreteJoint, scores: &[S], spec: LossSpec) -> Result<f64> {
    if !spec.scheme.is_unbiased() {
        return invalid(format!("the {} scheme has no ordinary loss", spec.scheme));
    }
    joint.check_scores(scores)?;
    let mut total = 0.0;
    for (i, g) in scores.iter().enumerate() {
        for y in 0..joint.num_classes() {
            total += joint.prob(i, y) * ordinary_value(spec, g.as_ref(), y);
        }
    }
    Ok(total)
}

/// Exact `E_p̄[L̄(g(x), ȳ)]`.
pub fn exact_comp_expectation<S: AsRef<[f64]>>(joint: &DiscreteJoint, scores: &[S], spec: LossSpec) -> Result<f64> {
    if !spec.scheme.is_unbiased() {
        return invalid(format!("the {} scheme has no complementary risk identity", spec.scheme));
    }
    joint.check_scores(scores)?;
    let mut total = 0.0;
    for (i, g) in scores.iter().enumerate() {
        for ybar in 0..joint.num_classes() {
            total += joint.comp_prob(i, ybar) * complementary_value(spec, g.as_ref(), ybar);
        }
    }
    Ok(total)
}

/// `|(K-1) E_p̄[L̄] - M1 + M2 - R(f)|`: zero (up to rounding) whenever the
/// binary loss is symmetric.
pub fn exact_comp_identity_gap<S: AsRef<[f64]>>(joint: &DiscreteJoint, scores: &[S], spec: LossSpec) -> Result<f64> {
    let k = joint.num_classes();
    let (m1, m2) = loss_constants(spec.scheme, k)?;
    let comp = exact_comp_expectation(joint, scores, spec)?;
    let risk = exact_risk(joint, scores, spec)?;
    Ok(((k - 1) as f64 * comp - m1 + m2 - risk).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{BinaryLossKind::*, Scheme};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    const SIG_PC: LossSpec = LossSpec::pc(Sigmoid);

    fn zeros(k: usize) -> Vec<f64> {
        vec![0.0; k]
    }

    #[test]
    fn comp_risk_examples() {
        let r = empirical_comp_risk(SIG_PC, &[(zeros(3), 0)], 3).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-14);
        assert!(r.includes_constants);
        assert_eq!((r.n_comp, r.n_ord), (1, 0));
        let r = empirical_comp_risk(LossSpec::ova(Sigmoid), &[(zeros(3), 0)], 3).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-14);
        let empty: [(Vec<f64>, usize); 0] = [];
        assert!(empirical_comp_risk(SIG_PC, &empty, 3).is_err());
        assert!(empirical_comp_risk(SIG_PC, &[(zeros(2), 0)], 3).is_err());
    }

    #[test]
    fn comp_risk_closed_form() {
        // all-zero scores make every PC complementary loss equal (K-1)/2 = M1/K
        for k in 2..7 {
            let samples: Vec<_> = (0..k).map(|ybar| (zeros(k), ybar)).collect();
            let (m1, m2) = loss_constants(Scheme::Pc, k).unwrap();
            let r = empirical_comp_risk(SIG_PC, &samples, k).unwrap();
            let expected = (k - 1) as f64 * m1 / k as f64 - m1 + m2;
            assert_abs_diff_eq!(r.value, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn ordinary_risk_examples() {
        let r = empirical_ordinary_risk(SIG_PC, &[(zeros(3), 0)]).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-15);
        let zo = LossSpec::pc(ZeroOne);
        let perfect = [(vec![3.0, 0.0, -1.0], 0), (vec![-1.0, 2.0, 0.0], 1)];
        assert_eq!(empirical_ordinary_risk(zo, &perfect).unwrap().value, 0.0);
        let a = multiclass_value(SIG_PC, &[1.0, 0.5, -2.0], 1);
        let b = multiclass_value(SIG_PC, &[0.3, 0.2, 0.1], 2);
        let r = empirical_ordinary_risk(SIG_PC, &[(vec![1.0, 0.5, -2.0], 1), (vec![0.3, 0.2, 0.1], 2)]).unwrap();
        assert_abs_diff_eq!(r.value, (a + b) / 2.0, epsilon = 1e-15);
    }

    fn multiclass_value(spec: LossSpec, g: &[f64], y: usize) -> f64 {
        crate::multiclass_loss(spec, g, y).unwrap()
    }

    #[test]
    fn combined_examples() {
        let ord = [(zeros(3), 0)];
        let comp = [(zeros(3), 0)];
        let r = combined_objective(0.5, &ord, &comp, SIG_PC, 3, false).unwrap();
        assert_abs_diff_eq!(r.value, 1.5, epsilon = 1e-14);
        let r = combined_objective(0.5, &ord, &comp, SIG_PC, 3, true).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-14);
        assert!(combined_objective(1.5, &ord, &comp, SIG_PC, 3, true).is_err());
        assert!(combined_objective(-0.1, &ord, &comp, SIG_PC, 3, true).is_err());
        let empty: [(Vec<f64>, usize); 0] = [];
        assert!(combined_objective(0.5, &empty, &comp, SIG_PC, 3, true).is_err());
        assert!(combined_objective(1.0, &ord, &empty, SIG_PC, 3, true).is_ok());
        assert!(combined_objective(0.0, &empty, &comp, SIG_PC, 3, true).is_ok());
    }

    #[test]
    fn combined_endpoints_and_affinity() {
        let mut rng = Pcg64::seed_from_u64(3);
        let draw = |rng: &mut Pcg64, n: usize| -> Vec<(Vec<f64>, usize)> {
            (0..n).map(|_| ((0..4).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(0..4))).collect()
        };
        let ord = draw(&mut rng, 7);
        let comp = draw(&mut rng, 11);
        let a = combined_objective(1.0, &ord, &comp, SIG_PC, 4, true).unwrap().value;
        let b = combined_objective(0.0, &ord, &comp, SIG_PC, 4, true).unwrap().value;
        assert_eq!(a, empirical_ordinary_risk(SIG_PC, &ord).unwrap().value);
        assert_eq!(b, empirical_comp_risk(SIG_PC, &comp, 4).unwrap().value);
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let v = combined_objective(alpha, &ord, &comp, SIG_PC, 4, true).unwrap().value;
            assert!((v - (alpha * a + (1.0 - alpha) * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_score_examples() {
        assert_eq!(validation_score(Scheme::Pc, &[(zeros(3), 0)], 3).unwrap(), 3.0);
        assert_eq!(validation_score(Scheme::Pc, &[(vec![-1.0, 0.5, 0.2], 0)], 3).unwrap(), -1.0);
        // affine in the number of violated pairwise margins
        let one_violation = validation_score(Scheme::Pc, &[(vec![0.0, 1.0, -1.0], 0)], 3).unwrap();
        assert_eq!(one_violation, 1.0);
        let empty: [(Vec<f64>, usize); 0] = [];
        assert!(validation_score(Scheme::Pc, &empty, 3).is_err());
    }

    #[test]
    fn joint_validation() {
        assert!(DiscreteJoint::new(vec![vec![0.0]], vec![1.0], vec![vec![0.5, 0.5]]).is_ok());
        assert!(DiscreteJoint::new(vec![vec![0.0]], vec![0.9], vec![vec![0.5, 0.5]]).is_err());
        assert!(DiscreteJoint::new(vec![vec![0.0]], vec![1.0], vec![vec![1.2, -0.2]]).is_err());
        assert!(DiscreteJoint::new(vec![vec![0.0]], vec![1.0], vec![vec![1.0]]).is_err());
        let too_big = DiscreteJoint::random(501, 2, 1, &mut Pcg64::seed_from_u64(0));
        assert!(too_big.is_err());
    }

    #[test]
    fn exact_risk_examples() {
        // point mass on (x0, y=1)
        let joint = DiscreteJoint::new(
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0, 0.0], vec![1.0 / 3.0; 3]],
        )
        .unwrap();
        let scores = [vec![0.3, -0.2, 1.0], vec![0.0, 0.0, 0.0]];
        assert_abs_diff_eq!(
            exact_risk(&joint, &scores, SIG_PC).unwrap(),
            multiclass_value(SIG_PC, &scores[0], 1),
            epsilon = 1e-15
        );
        // uniform over two patterns
        let joint =
            DiscreteJoint::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
                .unwrap();
        let scores = [vec![0.4, -0.4], vec![2.0, 1.0]];
        let a = multiclass_value(SIG_PC, &scores[0], 0);
        let b = multiclass_value(SIG_PC, &scores[1], 1);
        assert_abs_diff_eq!(exact_risk(&joint, &scores, SIG_PC).unwrap(), (a + b) / 2.0, epsilon = 1e-15);
        assert!(exact_risk(&joint, &scores[..1], SIG_PC).is_err());
    }

    #[test]
    fn exact_risk_matches_direct_summation() {
        let mut rng = Pcg64::seed_from_u64(11);
        let joint = DiscreteJoint::random(3, 3, 2, &mut rng).unwrap();
        let scores: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        // independent oracle: re-expand p(x,y) and the PC loss by hand
        let mut oracle = 0.0;
        for (i, g) in scores.iter().enumerate() {
            for y in 0..3 {
                let mut loss = 0.0;
                for j in 0..3 {
                    if j != y {
                        loss += 1.0 / (1.0 + (g[y] - g[j]).exp());
                    }
                }
                oracle += joint.pattern_probs[i] * joint.class_probs[i][y] * loss;
            }
        }
        assert!((exact_risk(&joint, &scores, SIG_PC).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn identity_gap_vanishes_for_symmetric_losses() {
        let mut rng = Pcg64::seed_from_u64(5);
        for k in 2..=6 {
            for _ in 0..10 {
                let joint = DiscreteJoint::random(5, k, 2, &mut rng).unwrap();
                let scores: Vec<Vec<f64>> =
                    (0..5).map(|_| (0..k).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
                for kind in [Sigmoid, Ramp, ZeroOne] {
                    for spec in [LossSpec::ova(kind), LossSpec::pc(kind)] {
                        let gap = exact_comp_identity_gap(&joint, &scores, spec).unwrap();
                        assert!(gap < 1e-12, "{spec} k={k}: gap {gap}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_gap_is_nonzero_for_squared_hinge() {
        let mut rng = Pcg64::seed_from_u64(9);
        let joint = DiscreteJoint::random(4, 3, 2, &mut rng).unwrap();
        let scores: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let gap = exact_comp_identity_gap(&joint, &scores, LossSpec::pc(SquaredHinge)).unwrap();
        assert!(gap > 1e-3, "gap {gap}");
    }

    #[test]
    fn complementary_sampler_matches_comp_joint() {
        let mut rng = Pcg64::seed_from_u64(1);
        let joint = DiscreteJoint::random(2, 3, 1, &mut rng).unwrap();
        let n = 200_000;
        let mut counts = [[0usize; 3]; 2];
        for (i, ybar) in joint.sample_complementary(n, &mut rng) {
            counts[i][ybar] += 1;
        }
        for (i, row) in counts.iter().enumerate() {
            for (ybar, &c) in row.iter().enumerate() {
                let p = joint.comp_prob(i, ybar);
                let sd = (p * (1.0 - p) / n as f64).sqrt();
                assert!((c as f64 / n as f64 - p).abs() < 5.0 * sd + 1e-12);
            }
        }
    }
}
