//! Experiment harness for complementary-label learning: seeded benchmark
//! protocols, result tables with t-test bolding, the invariant suite and
//! bound tables. The `complabel` binary is a thin clap front end over this
//! crate.

pub mod bounds;
pub mod check;
pub mod manifest;
pub mod protocol;
pub mod report;

pub use check::{CheckReport, CheckSuite};
pub use manifest::{Command, DatasetSource, RunManifest, TrainingOptions};
pub use protocol::{run_bench, run_combine};
pub use report::{welch_t_test, ResultRow, ResultTable, WelchTest};
