//! Bagged boosted trees for longitudinal (EMA-style) binary classification.
//!
//! The crate provides
//!
//! * [`data`]: subject/day/sequence records, CSV I/O, the early-prediction
//!   transform and a synthetic study generator;
//! * [`tree`]: weighted Gini classification trees, the base learner;
//! * [`adaboost`]: discrete AdaBoost with shrinkage and weighted subsampling;
//! * [`bbt`]: bagged boosted trees with subject folds, one-record-per-subject
//!   bootstrap draws and out-of-bag selection of the common stage count;
//! * [`sampling`]: over/under-sampling with jitter to turn a median
//!   classifier into a q-classifier;
//! * [`bench`]: baseline learners and the subject-count sweep.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod adaboost;
pub mod bbt;
pub mod bench;
pub mod data;
pub mod error;
pub mod persist;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type Record = data::Record<f64>;
pub type FeatureValue = data::FeatureValue<f64>;
pub type Tree = tree::Tree<f64>;
pub type TreeParams = tree::TreeParams<f64>;
pub type BoostConfig = adaboost::BoostConfig<f64>;
pub type BoostedTrees = adaboost::BoostedTrees<f64>;
pub type BbtConfig = bbt::BbtConfig<f64>;
pub type BbtModel = bbt::BbtModel<f64>;
pub type QSpec = sampling::QSpec<f64>;
pub type TrainedModel = bench::TrainedModel<f64>;

pub type Dataset32 = data::Dataset<f32>;
pub type BoostedTrees32 = adaboost::BoostedTrees<f32>;
pub type BbtModel32 = bbt::BbtModel<f32>;
