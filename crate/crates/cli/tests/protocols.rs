//! Protocol-level behaviour of `bench`, `combine` and the check suite.

use complabel_cli::protocol::{CL, OL, OL_CL};
use complabel_cli::{run_bench, run_combine, CheckSuite, Command, DatasetSource, RunManifest};
use complabel_core::{loss_constants, BinaryLossKind, LossSpec, Scheme};

fn synth(k: usize, separation: f64) -> DatasetSource {
    DatasetSource::Synth { classes: k, dim: 2, separation }
}

#[test]
fn pc_matches_or_beats_ml_in_most_paired_trials() {
    let mut m = RunManifest::new(Command::Bench, synth(3, 4.0));
    m.methods = vec![LossSpec::pc(BinaryLossKind::Sigmoid), LossSpec::ml(BinaryLossKind::Sigmoid)];
    m.trials = 5;
    let table = run_bench(&m).unwrap();
    let (pc, ml) = (&table.rows[0].accuracies, &table.rows[1].accuracies);
    let wins = pc.iter().zip(ml).filter(|(p, m)| p >= m).count();
    assert!(wins >= 4, "pc {pc:?} vs ml {ml:?}");
}

fn small_combine(alpha: f64) -> RunManifest {
    let mut m = RunManifest::new(Command::Combine, synth(4, 3.0));
    m.train_per_class = 80;
    m.test_per_class = 50;
    m.trials = 3;
    m.alpha = Some(alpha);
    m.training.iterations = 300;
    m.training.lambda_grid = Some(vec![1e-4, 1e-1]);
    m
}

fn column(table: &complabel_cli::ResultTable, name: &str) -> Vec<f64> {
    table.rows.iter().find(|r| r.method == name).unwrap().accuracies.clone()
}

#[test]
fn combined_column_reduces_to_endpoints() {
    // alpha = 1 ignores the complementary part and alpha = 0 the ordinary part
    let at_one = run_combine(&small_combine(1.0)).unwrap();
    assert_eq!(column(&at_one, OL_CL), column(&at_one, OL));
    let at_zero = run_combine(&small_combine(0.0)).unwrap();
    assert_eq!(column(&at_zero, OL_CL), column(&at_zero, CL));
    assert_eq!(column(&at_zero, OL), column(&at_one, OL));
}

#[test]
fn single_trial_is_reported_without_spread() {
    let mut m = small_combine(0.5);
    m.trials = 1;
    let table = run_combine(&m).unwrap();
    assert!(table.rows.iter().all(|r| r.std == 0.0 && r.accuracies.len() == 1));
    let best = table.rows.iter().map(|r| r.mean).fold(f64::MIN, f64::max);
    assert!(table.rows.iter().all(|r| r.bold == (r.mean == best)));
}

fn broken_m1(scheme: Scheme, k: usize) -> complabel_core::Result<(f64, f64)> {
    let (m1, m2) = loss_constants(scheme, k)?;
    Ok((m1 * 1.01, m2))
}

#[test]
fn broken_constant_fails_the_named_property() {
    let report = CheckSuite { constants: broken_m1, seed: 3 }.run();
    assert!(!report.all_passed());
    assert!(report.failed().contains(&"theorem2-sum"));
    assert!(report.summary().ends_with(&format!("{} failed", report.failed().len())));
    assert!(CheckSuite { seed: 3, ..CheckSuite::default() }.run().all_passed());
}
