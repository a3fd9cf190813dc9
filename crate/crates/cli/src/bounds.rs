//! Bound tables over a sweep of sample sizes.

use std::fmt::Write as _;

use complabel_core::theory::{estimation_error_bound, rademacher_linear, uniform_deviation_bound, BoundInputs};
use complabel_core::Scheme;

/// Rademacher complexity: fixed, or `C_w C_φ / √n` recomputed per `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Complexity {
    Fixed(f64),
    Linear { c_w: f64, c_phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub n: u64,
    pub rademacher: f64,
    pub ova_deviation: f64,
    pub ova_estimation: f64,
    pub pc_deviation: f64,
    pub pc_estimation: f64,
}

pub fn bound_table(
    classes: usize,
    lipschitz: f64,
    complexity: Complexity,
    delta: f64,
    ns: &[u64],
) -> complabel_core::Result<Vec<BoundRow>> {
    ns.iter()
        .map(|&n| {
            let rademacher = match complexity {
                Complexity::Fixed(r) => r,
                Complexity::Linear { c_w, c_phi } => rademacher_linear(c_w, c_phi, n)?,
            };
            let inputs = BoundInputs { classes, lipschitz, rademacher, delta, n };
            Ok(BoundRow {
                n,
                rademacher,
                ova_deviation: uniform_deviation_bound(Scheme::Ova, &inputs)?,
                ova_estimation: estimation_error_bound(Scheme::Ova, &inputs)?,
                pc_deviation: uniform_deviation_bound(Scheme::Pc, &inputs)?,
                pc_estimation: estimation_error_bound(Scheme::Pc, &inputs)?,
            })
        })
        .collect()
}

pub fn format_table(rows: &[BoundRow]) -> String {
    let mut out = format!(
        "{:>12} {:>12} {:>14} {:>14} {:>14} {:>14}\n",
        "n", "rademacher", "ova_deviation", "ova_estimation", "pc_deviation", "pc_estimation"
    );
    for r in rows {
        writeln!(
            out,
            "{:>12} {:>12.6} {:>14.6} {:>14.6} {:>14.6} {:>14.6}",
            r.n, r.rademacher, r.ova_deviation, r.ova_estimation, r.pc_deviation, r.pc_estimation
        )
        .unwrap();
    }
    out
}
