//! Minimal deterministic neural-network engine.

mod adam;
mod matrix;
mod mlp;
mod ratio_net;
mod standardize;

pub use adam::AdamState;
pub use matrix::Matrix;
pub(crate) use matrix::{gemm_ab, gemm_abt, gemm_atb};
pub use mlp::{Classifier, ClassifierConfig};
pub use ratio_net::{
    pair_input, random_input, ArchPreset, Architecture, Mode, ParamLayout, RatioNet, RunningStats, BN_EPS,
    BN_MOMENTUM,
};
pub use standardize::{Standardizer, STD_FLOOR};
