//! Result tables: aggregation over trials, Welch t-test bolding, CSV and
//! markdown output.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Significance level of the two-sided Welch test used for bolding.
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n-1) sample variance; 0 for a single sample.
fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Welch's unequal-variance t-test. Returns `None` when either sample has
/// fewer than two entries.
///
/// If both samples have zero variance the test degenerates: equal means give
/// `p = 1`, different means `p = 0`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let (t, p_value) = if diff == 0.0 { (0.0, 1.0) } else { (diff.signum() * f64::INFINITY, 0.0) };
        return Some(WelchTest { t, df: na + nb - 2.0, p_value });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Some(WelchTest { t, df, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub dataset: String,
    pub classes: String,
    /// Per-trial test accuracies, as fractions.
    pub accuracies: Vec<f64>,
    /// Mean accuracy in percent.
    pub mean: f64,
    /// Sample standard deviation in percent (0 for one trial).
    pub std: f64,
    pub bold: bool,
}

/// One table block: methods compared on the same dataset and classes.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Adds a group of methods evaluated on the same trials and marks the best
    /// mean plus every method not significantly different from it.
    pub fn push_group(&mut self, dataset: &str, classes: &str, methods: Vec<(String, Vec<f64>)>) {
        let mut rows: Vec<ResultRow> = methods
            .into_iter()
            .map(|(method, accuracies)| {
                let pct: Vec<f64> = accuracies.iter().map(|a| 100.0 * a).collect();
                ResultRow {
                    method,
                    dataset: dataset.to_string(),
                    classes: classes.to_string(),
                    mean: mean(&pct),
                    std: sample_variance(&pct).sqrt(),
                    accuracies,
                    bold: false,
                }
            })
            .collect();
        mark_best(&mut rows);
        self.rows.extend(rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,dataset,classes,trials,mean_accuracy,std_accuracy,bold,trial_accuracies\n");
        for r in &self.rows {
            let trials: Vec<String> = r.accuracies.iter().map(|a| format!("{:.4}", 100.0 * a)).collect();
            writeln!(
                out,
                "{},{},{},{},{:.4},{:.4},{},{}",
                r.method,
                r.dataset,
                r.classes,
                r.accuracies.len(),
                r.mean,
                r.std,
                r.bold,
                trials.join(";")
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_csv()).with_context(|| format!("writing {}", path.display()))
    }

    /// Aligned markdown table; bold cells are the best and equivalent methods.
    pub fn to_markdown(&self) -> String {
        let header = ["method", "dataset", "classes", "accuracy % (std)"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let acc = format!("{:.1} ({:.1})", r.mean, r.std);
                [
                    r.method.clone(),
                    r.dataset.clone(),
                    r.classes.clone(),
                    if r.bold { format!("**{acc}**") } else { acc },
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cols: [&str; 4]| {
            let padded: Vec<String> = cols.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(header);
        let dashes: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&format!("|-{}-|\n", dashes.join("-|-")));
        for row in &cells {
            out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
        }
        out
    }
}

fn mark_best(rows: &mut [ResultRow]) {
    let Some(best) = (0..rows.len()).reduce(|b, i| if rows[i].mean > rows[b].mean { i } else { b }) else {
        return;
    };
    let best_acc = rows[best].accuracies.clone();
    for (i, row) in rows.iter_mut().enumerate() {
        row.bold = i == best || welch_t_test(&row.accuracies, &best_acc).is_some_and(|t| t.p_value >= SIGNIFICANCE);
    }
}
