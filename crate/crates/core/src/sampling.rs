//! Turning a median classifier into a q-classifier.
//!
//! A rule that classifies `+1` when `p(x) ≥ q` is obtained either by
//! thresholding an estimated probability at `q`, or by resampling: positives
//! are replicated `a` times and negatives `b` times with `a/b ≈ (1-q)/q`,
//! which moves the median of the resampled class probability onto the
//! `q`-level set of the original one. Replicas after the first receive
//! Gaussian jitter on numeric features so that trees see fresh points rather
//! than exact ties.

use rand_distr::{Distribution, StandardNormal};

use crate::bbt::{fit_bbt, BbtConfig, BbtModel};
use crate::data::{Class, Dataset, FeatureKind, FeatureValue, Record};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_REPLICATION: u32 = 20;

/// Default jitter, as a multiple of each numeric feature's standard deviation.
pub const DEFAULT_JITTER_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct QSpec<T> {
    pub q: T,
    /// Jitter standard deviation applied to every numeric feature; `None`
    /// uses [`DEFAULT_JITTER_SCALE`] times the feature's standard deviation.
    pub jitter_sd: Option<T>,
    pub max_replication: u32,
}

impl<T: Scalar> QSpec<T> {
    pub fn new(q: T) -> Self {
        QSpec {
            q,
            jitter_sd: None,
            max_replication: DEFAULT_MAX_REPLICATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > T::zero() && self.q < T::one()) {
            return Err(Error::usage(format!("q = {} outside (0, 1)", self.q)));
        }
        if let Some(sd) = self.jitter_sd {
            if !(sd >= T::zero() && sd.is_finite()) {
                return Err(Error::usage("jitter sd must be non-negative"));
            }
        }
        if self.max_replication == 0 {
            return Err(Error::usage("max_replication must be positive"));
        }
        Ok(())
    }
}

/// Replication factors: every positive appears `positive` times and every
/// negative `negative` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub positive: u32,
    pub negative: u32,
    /// The quantile actually targeted, `negative / (positive + negative)`.
    pub effective_q: f64,
    /// Whether `positive / negative` equals `(1-q)/q`.
    pub exact: bool,
}

/// Smallest `(a, b)` with `a, b ≤ max_replication` whose ratio is closest to
/// `(1-q)/q`.
pub fn replication_factors<T: Scalar>(q: T, max_replication: u32) -> Result<Replication> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::usage(format!("q = {q} outside (0, 1)")));
    }
    if max_replication == 0 {
        return Err(Error::usage("max_replication must be positive"));
    }
    let q = q.to_f64_lossy();
    let target = (1.0 - q) / q;
    let mut best = (1u32, 1u32, f64::INFINITY);
    for b in 1..=max_replication {
        for a in 1..=max_replication {
            let err = (a as f64 / b as f64 - target).abs();
            if err < best.2 {
                best = (a, b, err);
            }
        }
    }
    let (a, b, err) = best;
    Ok(Replication {
        positive: a,
        negative: b,
        effective_q: b as f64 / (a + b) as f64,
        exact: err <= 1e-9 * target,
    })
}

#[derive(Debug, Clone)]
pub struct QSampled<T> {
    pub dataset: Dataset<T>,
    pub replication: Replication,
}

/// Per-feature sample standard deviation of numeric features (0 for
/// categorical ones).
pub fn numeric_sd<T: Scalar>(ds: &Dataset<T>) -> Vec<T> {
    let n = ds.len();
    (0..ds.schema().len())
        .map(|j| {
            if ds.schema().kind(j) != FeatureKind::Numeric || n < 2 {
                return T::zero();
            }
            let xs = ds.records().iter().filter_map(|r| r.features[j].as_numeric());
            let mean = xs.clone().fold(T::zero(), |a, x| a + x) / T::of_usize(n);
            let ss = xs.fold(T::zero(), |a, x| a + (x - mean) * (x - mean));
            (ss / T::of_usize(n - 1)).sqrt()
        })
        .collect()
}

/// Over/under-samples `ds` for quantile `spec.q`.
///
/// Each record is followed by its replicas. Replica `k` of a record with
/// within-day position `seq` gets position `seq·r + k`, `r = max(a, b)`,
/// which keeps keys unique and within-day order intact; replica 0 is the
/// unjittered original.
pub fn qsample<T: Scalar>(ds: &Dataset<T>, spec: &QSpec<T>, seed: u64) -> Result<QSampled<T>> {
    spec.validate()?;
    if ds.count_class(Class::Positive) == 0 || ds.count_class(Class::Negative) == 0 {
        return Err(Error::usage("q-sampling needs both classes present"));
    }
    let replication = replication_factors(spec.q, spec.max_replication)?;
    if !replication.exact {
        log::warn!(
            "q = {} not reachable with at most {} replicas; targeting q = {}",
            spec.q,
            spec.max_replication,
            replication.effective_q
        );
    }
    let stride = replication.positive.max(replication.negative) as u64;
    if stride == 1 {
        return Ok(QSampled {
            dataset: ds.clone(),
            replication,
        });
    }
    let sds: Vec<T> = match spec.jitter_sd {
        Some(sd) => vec![sd; ds.schema().len()],
        None => numeric_sd(ds)
            .into_iter()
            .map(|s| s * T::of(DEFAULT_JITTER_SCALE))
            .collect(),
    };
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::JITTER]));
    let mut out = Vec::new();
    for r in ds.records() {
        let copies = match r.label {
            Class::Positive => replication.positive,
            Class::Negative => replication.negative,
        };
        for k in 0..copies as u64 {
            let seq = r
                .seq
                .checked_mul(stride)
                .and_then(|s| s.checked_add(k))
                .ok_or_else(|| Error::usage(format!("seq {} too large to replicate", r.seq)))?;
            let features = if k == 0 {
                r.features.clone()
            } else {
                r.features
                    .iter()
                    .zip(&sds)
                    .map(|(v, &sd)| match *v {
                        FeatureValue::Numeric(x) => {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            FeatureValue::Numeric(x + sd * T::of(z))
                        }
                        cat => cat,
                    })
                    .collect()
            };
            out.push(Record {
                subject: r.subject.clone(),
                day: r.day,
                seq,
                features,
                label: r.label,
            });
        }
    }
    Ok(QSampled {
        dataset: Dataset::new(ds.schema().clone(), out)?,
        replication,
    })
}

/// `+1` iff the model's aggregated probability is at least `q`.
pub fn q_classify_threshold<T: Scalar>(model: &BbtModel<T>, x: &[FeatureValue<T>], q: T) -> Class {
    model.predict_at(x, q).1
}

/// Fits BBT on `qsample(ds)`; its median classification is the q-rule for
/// the original data. The jitter stream is derived from `cfg.seed`.
pub fn fit_q_classifier<T: Scalar>(
    ds: &Dataset<T>,
    cfg: &BbtConfig<T>,
    spec: &QSpec<T>,
) -> Result<(BbtModel<T>, Replication)> {
    let sampled = qsample(ds, spec, cfg.seed)?;
    let model = fit_bbt(&sampled.dataset, cfg)?;
    Ok((model, sampled.replication))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn small() -> Dataset<f64> {
        let cfg = SyntheticConfig {
            n_subjects: 6,
            n_days: 3,
            ..SyntheticConfig::default()
        };
        generate_synthetic(&cfg, 8).unwrap()
    }

    #[test]
    fn factors_for_common_quantiles() {
        let r = replication_factors(0.5f64, 20).unwrap();
        assert_eq!((r.positive, r.negative, r.exact), (1, 1, true));
        let r = replication_factors(0.25f64, 20).unwrap();
        assert_eq!((r.positive, r.negative, r.exact), (3, 1, true));
        assert_eq!(r.effective_q, 0.25);
        let r = replication_factors(0.75f64, 20).unwrap();
        assert_eq!((r.positive, r.negative), (1, 3));
        let r = replication_factors(0.4f64, 20).unwrap();
        assert_eq!((r.positive, r.negative), (3, 2));
    }

    #[test]
    fn unreachable_quantile_reports_effective_q() {
        let r = replication_factors(0.01f64, 20).unwrap();
        assert!(!r.exact);
        assert_eq!((r.positive, r.negative), (20, 1));
        assert!((r.effective_q - 1.0 / 21.0).abs() < 1e-15);
        assert!(replication_factors(0.0f64, 20).is_err());
        assert!(replication_factors(1.0f64, 20).is_err());
    }

    #[test]
    fn half_is_identity() {
        let ds = small();
        let out = qsample(&ds, &QSpec::new(0.5), 1).unwrap();
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn quarter_triples_positives_and_keeps_originals() {
        let ds = small();
        let out = qsample(&ds, &QSpec::new(0.25), 1).unwrap().dataset;
        let (np, nn) = (ds.count_class(Class::Positive), ds.count_class(Class::Negative));
        assert_eq!(out.count_class(Class::Positive), 3 * np);
        assert_eq!(out.count_class(Class::Negative), nn);
        let mut it = out.records().iter();
        for r in ds.records() {
            let first = it.next().unwrap();
            assert_eq!(
                (&first.subject, first.day, &first.features, first.label),
                (&r.subject, r.day, &r.features, r.label)
            );
            if r.label == Class::Positive {
                let a = it.next().unwrap();
                let b = it.next().unwrap();
                assert_ne!(a.features, r.features);
                assert_ne!(b.features, r.features);
                // categorical features are never jittered
                assert_eq!(a.features[5..], r.features[5..]);
            }
        }
        assert!(it.next().is_none());
    }

    #[test]
    fn single_class_rejected() {
        let ds = small();
        let pos: Vec<_> = ds
            .records()
            .iter()
            .filter(|r| r.label == Class::Positive)
            .cloned()
            .collect();
        let only = Dataset::new(ds.schema().clone(), pos).unwrap();
        assert!(matches!(qsample(&only, &QSpec::new(0.25), 0), Err(Error::Usage(_))));
    }

    #[test]
    fn jitter_is_seeded() {
        let ds = small();
        let a = qsample(&ds, &QSpec::new(0.2), 3).unwrap().dataset;
        let b = qsample(&ds, &QSpec::new(0.2), 3).unwrap().dataset;
        let c = qsample(&ds, &QSpec::new(0.2), 4).unwrap().dataset;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
