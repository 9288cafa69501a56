//! Generative SDL models, simulators and estimators.

pub mod estimate;
pub mod models;
pub mod semisynthetic;

pub use estimate::{
    estimate_strong, estimate_weak, xi_from_sigma, StrongEstimate, StrongEstimateConfig, StrongObjective, WeakEstimate,
    WeakEstimateConfig,
};
pub use models::{
    random_strong_params, random_weak_params, sample, sample_strong_filter, sample_weak_feature, sample_weak_filter, Dims,
    GenerativeParams, SimulatedData, Truth, Variant,
};
pub use semisynthetic::{bundled_bases, make_semisynthetic, SemiSyntheticSpec, SemiSyntheticTruth};
