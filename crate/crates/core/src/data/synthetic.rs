//! Synthetic longitudinal data shaped like a small EMA study.
//!
//! For subject `s` a latent effect `u_s ~ N(0, subject_effect_sd²)` is drawn.
//! Each day holds `K ~ Poisson(mean_obs_per_day)` observations, conditioned
//! on `K ≥ 1`. Within a day numeric features follow a stationary AR(1)
//! around `u_s` with unit marginal variance, and categorical features keep
//! their previous code with probability `within_day_correlation`, otherwise
//! redraw uniformly. The label is
//!
//! ```text
//! y = sign(score(x) + u_s + e),   e ~ N(0, noise_sd²),   sign(0) = +1
//! ```
//!
//! where `score` is the fixed function [`latent_score`]:
//!
//! ```text
//! score(x) =  1.0·x0 − 0.8·x1 + 0.6·x2          (numeric main effects)
//!           + 0.5·x0·x1                          (numeric interaction)
//!           + 0.8·[c0 = 0] − 0.8·[c0 = 1]        (categorical main effect)
//!           + 0.8·x0·[c1 = 0]                    (mixed interaction)
//!           + 0.8·[c0 = c1]                      (only when there are no numerics)
//! ```
//!
//! Terms whose features are absent from the configuration are dropped.

use indexmap::IndexMap;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::dataset::{Dataset, Record};
use super::schema::{Class, Feature, FeatureSchema, FeatureValue, SubjectId};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub n_days: usize,
    pub mean_obs_per_day: f64,
    pub subject_effect_sd: f64,
    pub noise_sd: f64,
    pub n_numeric: usize,
    pub n_categorical: usize,
    pub categorical_arity: u32,
    /// Lag-one dependence between consecutive observations of a day, in `[0, 1)`.
    pub within_day_correlation: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_subjects: 100,
            n_days: 14,
            mean_obs_per_day: 3.6,
            subject_effect_sd: 1.0,
            noise_sd: 1.0,
            n_numeric: 5,
            n_categorical: 4,
            categorical_arity: 3,
            within_day_correlation: 0.7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::usage(format!("synthetic config: {m}")));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive");
        }
        if self.n_days == 0 {
            return bad("n_days must be positive");
        }
        if !(self.mean_obs_per_day > 0.0 && self.mean_obs_per_day.is_finite()) {
            return bad("mean_obs_per_day must be positive");
        }
        if !(self.subject_effect_sd >= 0.0 && self.subject_effect_sd.is_finite()) {
            return bad("subject_effect_sd must be non-negative");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be non-negative");
        }
        if self.n_numeric + self.n_categorical == 0 {
            return bad("need at least one feature");
        }
        if self.categorical_arity < 2 {
            return bad("categorical_arity must be at least 2");
        }
        if !(0.0..1.0).contains(&self.within_day_correlation) {
            return bad("within_day_correlation must lie in [0, 1)");
        }
        Ok(())
    }

    /// `x0..x{n_numeric-1}` followed by `c0..c{n_categorical-1}`.
    pub fn schema(&self) -> FeatureSchema {
        let mut features: Vec<Feature> = (0..self.n_numeric).map(|j| Feature::numeric(format!("x{j}"))).collect();
        features.extend((0..self.n_categorical).map(|j| Feature::categorical(format!("c{j}"), self.categorical_arity)));
        FeatureSchema::new(features).expect("generated schema is valid")
    }

    /// Expected record count under the truncated-Poisson day sizes.
    pub fn expected_records(&self) -> f64 {
        let lambda = self.mean_obs_per_day;
        let per_day = lambda / (1.0 - (-lambda).exp());
        (self.n_subjects * self.n_days) as f64 * per_day
    }
}

const NUMERIC_WEIGHTS: [f64; 3] = [1.0, -0.8, 0.6];

/// The fixed label score, excluding subject effect and noise.
pub fn latent_score<T: Scalar>(features: &[FeatureValue<T>], cfg: &SyntheticConfig) -> f64 {
    let num = |j: usize| features[j].as_numeric().map(T::to_f64_lossy).unwrap_or(0.0);
    let cat = |j: usize| features[cfg.n_numeric + j].as_code().unwrap_or(u32::MAX);
    let k = cfg.n_numeric;
    let m = cfg.n_categorical;

    let mut s = 0.0;
    for (j, w) in NUMERIC_WEIGHTS.iter().enumerate().take(k) {
        s += w * num(j);
    }
    if k >= 2 {
        s += 0.5 * num(0) * num(1);
    }
    if m >= 1 {
        match cat(0) {
            0 => s += 0.8,
            1 => s -= 0.8,
            _ => {}
        }
    }
    if m >= 2 && k >= 1 && cat(1) == 0 {
        s += 0.8 * num(0);
    }
    if m >= 2 && k == 0 && cat(0) == cat(1) {
        s += 0.8;
    }
    s
}

/// `P(y = +1 | x, u)` under the generator.
pub fn true_probability<T: Scalar>(features: &[FeatureValue<T>], subject_effect: f64, cfg: &SyntheticConfig) -> f64 {
    let z = latent_score(features, cfg) + subject_effect;
    if cfg.noise_sd == 0.0 {
        return if z >= 0.0 { 1.0 } else { 0.0 };
    }
    Normal::new(0.0, cfg.noise_sd).expect("noise_sd validated").cdf(z)
}

/// Generated data together with the latent subject effects.
#[derive(Debug, Clone)]
pub struct SyntheticData<T> {
    pub dataset: Dataset<T>,
    pub subject_effects: IndexMap<SubjectId, f64>,
}

pub fn generate_synthetic<T: Scalar>(cfg: &SyntheticConfig, seed: u64) -> Result<Dataset<T>> {
    generate_synthetic_with_effects(cfg, seed).map(|d| d.dataset)
}

pub fn generate_synthetic_with_effects<T: Scalar>(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticData<T>> {
    cfg.validate()?;
    let schema = cfg.schema();
    let mut rng = rng_from_seed(seed);
    let poisson = Poisson::new(cfg.mean_obs_per_day).expect("mean validated");
    let rho = cfg.within_day_correlation;
    let innovation_sd = (1.0 - rho * rho).sqrt();
    let width = cfg.n_subjects.to_string().len().max(3);

    let mut records = Vec::new();
    let mut effects = IndexMap::with_capacity(cfg.n_subjects);
    for p in 0..cfg.n_subjects {
        let subject = SubjectId(format!("s{p:0width$}"));
        let z: f64 = StandardNormal.sample(&mut rng);
        let u = cfg.subject_effect_sd * z;
        effects.insert(subject.clone(), u);

        for day in 0..cfg.n_days {
            let count = loop {
                let k: f64 = poisson.sample(&mut rng);
                if k >= 1.0 {
                    break k as u64;
                }
            };
            let mut numeric = vec![0.0f64; cfg.n_numeric];
            let mut codes = vec![0u32; cfg.n_categorical];
            for seq in 0..count {
                for x in numeric.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *x = if seq == 0 {
                        u + e
                    } else {
                        u + rho * (*x - u) + innovation_sd * e
                    };
                }
                for c in codes.iter_mut() {
                    let keep = seq > 0 && rng.random::<f64>() < rho;
                    if !keep {
                        *c = rng.random_range(0..cfg.categorical_arity);
                    }
                }
                let features: Vec<FeatureValue<T>> = numeric
                    .iter()
                    .map(|&x| FeatureValue::Numeric(T::of(x)))
                    .chain(codes.iter().map(|&c| FeatureValue::Categorical(c)))
                    .collect();
                let e: f64 = StandardNormal.sample(&mut rng);
                let total = latent_score(&features, cfg) + u + cfg.noise_sd * e;
                let label = if total >= 0.0 { Class::Positive } else { Class::Negative };
                records.push(Record {
                    subject: subject.clone(),
                    day: day as u64,
                    seq,
                    features,
                    label,
                });
            }
        }
    }
    Ok(SyntheticData {
        dataset: Dataset::new(schema, records)?,
        subject_effects: effects,
    })
}
