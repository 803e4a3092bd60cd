//! Versioned JSON model files.
//!
//! A model file is an envelope holding the format version, the feature
//! schema the model was trained on, and the model itself. Loading checks the
//! version and, when asked, that a dataset's schema matches.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::TrainedModel;
use crate::data::FeatureSchema;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ModelFile<T> {
    pub format_version: u32,
    pub schema: FeatureSchema,
    /// Seed the model was trained with, for reproduction.
    pub seed: u64,
    #[serde(flatten)]
    pub model: TrainedModel<T>,
}

impl<T: Scalar> ModelFile<T> {
    pub fn new(schema: FeatureSchema, seed: u64, model: TrainedModel<T>) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            schema,
            seed,
            model,
        }
    }

    /// Errors unless `schema` is the one the model was trained on.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if &self.schema != schema {
            return Err(Error::usage(format!(
                "data columns [{}] do not match the model's [{}]",
                schema.names().collect::<Vec<_>>().join(","),
                self.schema.names().collect::<Vec<_>>().join(","),
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile<T> = serde_json::from_str(s)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::usage(format!(
                "unsupported model format version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if let TrainedModel::Bbt(m) = &file.model {
            // A structurally broken file is bad input, not an internal fault.
            m.check()
                .map_err(|e| Error::usage(format!("inconsistent model file: {e}")))?;
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{fit_algorithm, AlgoParams, Algorithm};
    use crate::data::{generate_synthetic, SyntheticConfig};

    #[test]
    fn every_algorithm_round_trips_exactly() {
        let cfg = SyntheticConfig {
            n_subjects: 6,
            n_days: 3,
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic::<f64>(&cfg, 3).unwrap();
        let params = AlgoParams {
            bagging_trees: 3,
            rf_trees: 3,
            bags: 3,
            boost: crate::adaboost::BoostConfig {
                n_rounds: 5,
                ..Default::default()
            },
            ..AlgoParams::default()
        };
        for alg in Algorithm::ALL {
            let model = fit_algorithm(alg, &ds, &params, 1).unwrap();
            let file = ModelFile::new(ds.schema().clone(), 1, model);
            let back = ModelFile::<f64>::from_json(&file.to_json().unwrap()).unwrap();
            assert_eq!(back, file, "{alg}");
            for r in ds.records() {
                assert_eq!(back.model.probability(&r.features), file.model.probability(&r.features));
            }
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let cfg = SyntheticConfig {
            n_subjects: 3,
            n_days: 2,
            ..SyntheticConfig::default()
        };
        let ds = generate_synthetic::<f64>(&cfg, 3).unwrap();
        let model = fit_algorithm(Algorithm::Sct, &ds, &AlgoParams::default(), 0).unwrap();
        let mut file = ModelFile::new(ds.schema().clone(), 0, model);
        file.format_version = 99;
        assert!(ModelFile::<f64>::from_json(&file.to_json().unwrap()).is_err());
    }
}
