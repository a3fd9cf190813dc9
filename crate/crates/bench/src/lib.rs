//! Fixtures shared by the criterion benchmarks.

use complabel_core::data::{split_train_val, to_complementary};
use complabel_core::rng::seeded;
use complabel_core::{synth_gaussian, Architecture, CompDataset, Model, StandardizationStats};

/// Standardized complementary training and validation sets on `k`
/// synthetic Gaussian classes in `d` dimensions.
pub fn comp_fixture(k: usize, d: usize, per_class: usize) -> (CompDataset, CompDataset) {
    let data = synth_gaussian(k, d, per_class, 4.0, 1).expect("valid synth parameters");
    let stats = StandardizationStats::fit(complabel_core::Dataset::features(&data)).expect("nonempty data");
    let data = stats.apply_labeled(&data).expect("matching dimension");
    let comp = to_complementary(&data, 2).expect("at least two classes");
    split_train_val(&comp, 0.25, 3).expect("enough rows")
}

pub fn model_fixture(arch: Architecture, k: usize, d: usize) -> Model {
    Model::init(arch, k, d, &mut seeded(4)).expect("valid shape")
}
