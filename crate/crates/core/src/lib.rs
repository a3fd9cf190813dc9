//! Learning multiclass classifiers from complementary labels.
//!
//! A complementary label names a class the pattern does *not* belong to.
//! With a binary loss satisfying `ℓ(z) + ℓ(-z) = 1`, the OVA and PC
//! complementary losses give an unbiased estimate of the ordinary
//! classification risk, so a classifier can be trained by plain empirical
//! risk minimization on complementarily labeled data.

pub mod error;
pub mod losses;
pub mod multiclass;

pub use error::{Error, Result};
pub use losses::{check_symmetry, lipschitz_constant, loss_grad, loss_value, BinaryLossKind};
pub use multiclass::{
    baseline_loss, comp_loss, comp_loss_grad, loss_constants, multiclass_loss, multiclass_loss_grad, LossSpec, Scheme,
};
pub mod risk;

pub use risk::{
    combined_objective, combined_validation_score, empirical_comp_risk, empirical_ordinary_risk,
    exact_comp_identity_gap, exact_risk, validation_score, DiscreteJoint, RiskEstimate,
};
pub mod models;

pub use models::{argmax, objective_gradient, Architecture, Batch, LinearModel, MlpModel, MlpUnit, Model};
pub mod data;
pub mod rng;

pub use data::{
    load_csv, split_ol_cl, split_train_val, subsample_per_class, synth_gaussian, to_complementary, write_csv,
    CompDataset, Dataset, Features, LabeledDataset, StandardizationStats,
};
pub mod optim;
pub mod theory;

pub use optim::{
    accuracy, adam_step, grid_search, train, AdamConfig, AdamState, GridOutcome, GridRow, HistoryRow, Supervision,
    TrainConfig, TrainOutcome,
};
pub use theory::{estimation_error_bound, rademacher_linear, uniform_deviation_bound, BoundInputs};
