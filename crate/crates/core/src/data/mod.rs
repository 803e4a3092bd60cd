//! Longitudinal data representation, CSV ingestion, the early-prediction
//! transform and the synthetic generator.

mod csv_io;
mod dataset;
mod schema;
mod synthetic;
mod transform;

pub use csv_io::{header, load_csv, load_feature_rows, read_csv, to_csv_string, write_csv, write_csv_to, FeatureRow};
pub use dataset::{Dataset, Record, Sample};
pub use schema::{Class, Feature, FeatureKind, FeatureSchema, FeatureValue, SubjectId};
pub use synthetic::{
    generate_synthetic, generate_synthetic_with_effects, latent_score, true_probability, SyntheticConfig, SyntheticData,
};
pub use transform::{early_prediction_count, successors, to_early_prediction};
