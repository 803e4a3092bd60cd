//! Discrete AdaBoost over weighted trees.
//!
//! Starting from `F_0 = 0` and uniform weights, each round fits a tree `g_m`,
//! measures its weighted error `ε_m`, sets `α_m = ½ ln((1-ε_m)/ε_m)`,
//! accumulates `F_m = F_{m-1} + ν·α_m·g_m` and reweights
//! `w_i ← w_i·exp(-ν·α_m·g_m(x_i)·y_i)` followed by renormalisation.
//!
//! A round whose tree has `ε_m ≥ ½` is dropped and the weights are reset to
//! uniform, so a model may hold fewer than `n_rounds` stages.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{Class, FeatureValue, Sample};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::{compensated_sum, Scalar};
use crate::tree::{fit_tree, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BoostConfig<T> {
    /// Number of boosting rounds `M`.
    pub n_rounds: usize,
    /// Shrinkage `ν` in `(0, 1]`.
    pub shrinkage: T,
    /// Fraction of the training rows drawn, without replacement and in
    /// proportion to the current weights, to fit each tree.
    pub subsample_fraction: T,
    #[serde(with = "tree_params_serde")]
    pub tree: TreeParams<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for BoostConfig<T> {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 100,
            shrinkage: T::one(),
            subsample_fraction: T::one(),
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

impl<T: Scalar> BoostConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrinkage > T::zero() && self.shrinkage <= T::one()) {
            return Err(Error::usage(format!("shrinkage {} outside (0, 1]", self.shrinkage)));
        }
        if !(self.subsample_fraction > T::zero() && self.subsample_fraction <= T::one()) {
            return Err(Error::usage(format!(
                "subsample fraction {} outside (0, 1]",
                self.subsample_fraction
            )));
        }
        self.tree.validate()
    }
}

mod tree_params_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Scalar;
    use crate::tree::TreeParams;

    #[derive(Serialize, Deserialize)]
    struct Repr<T> {
        max_depth: usize,
        min_node_weight: T,
        min_impurity_decrease: T,
    }

    pub fn serialize<T: Scalar, S: Serializer>(p: &TreeParams<T>, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            max_depth: p.max_depth,
            min_node_weight: p.min_node_weight,
            min_impurity_decrease: p.min_impurity_decrease,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<TreeParams<T>, D::Error> {
        let r = Repr::<T>::deserialize(d)?;
        Ok(TreeParams {
            max_depth: r.max_depth,
            min_node_weight: r.min_node_weight,
            min_impurity_decrease: r.min_impurity_decrease,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Stage<T> {
    pub tree: Tree<T>,
    /// Coefficient of the tree in `F`, i.e. `ν·α_m`.
    pub alpha: T,
    /// Weighted training error `ε_m` on the pre-update weights.
    pub error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BoostedTrees<T> {
    pub stages: Vec<Stage<T>>,
    pub config: BoostConfig<T>,
}

/// What happened in one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace<T> {
    pub round: usize,
    pub error: T,
    pub retained: bool,
    /// Sum and minimum of the weights after the round's update (or reset).
    pub weight_sum: T,
    pub min_weight: T,
}

/// `½ ln((1-ε)/ε)` with `ε` clamped into `[floor, 1-floor]`, `floor = 1e-10`
/// for `f64`.
pub fn alpha_from_error<T: Scalar>(error: T) -> T {
    let floor = T::error_floor();
    let e = error.max(floor).min(T::one() - floor);
    T::of(0.5) * ((T::one() - e) / e).ln()
}

/// `w'_i ∝ w_i·exp(-α·g(x_i)·y_i)`, renormalised to sum to one.
pub fn update_weights<T: Scalar>(weights: &[T], alpha: T, predictions: &[Class], labels: &[Class]) -> Result<Vec<T>> {
    if weights.len() != predictions.len() || weights.len() != labels.len() {
        return Err(Error::usage(format!(
            "length mismatch: {} weights, {} predictions, {} labels",
            weights.len(),
            predictions.len(),
            labels.len()
        )));
    }
    let mut out: Vec<T> = weights
        .iter()
        .zip(predictions.iter().zip(labels))
        .map(|(&w, (&g, &y))| {
            let margin = g.sign::<T>() * y.sign::<T>();
            (w * (-alpha * margin).exp()).max(T::min_positive_value())
        })
        .collect();
    let total = compensated_sum(out.iter().copied());
    for w in &mut out {
        *w /= total;
    }
    Ok(out)
}

/// Logistic link `p = 1 / (1 + exp(-2F))`.
pub fn ccpf<T: Scalar>(f: T) -> T {
    let two = T::one() + T::one();
    if f >= T::zero() {
        T::one() / (T::one() + (-two * f).exp())
    } else {
        let e = (two * f).exp();
        e / (T::one() + e)
    }
}

pub fn fit_adaboost<T: Scalar>(sample: &Sample<'_, T>, cfg: &BoostConfig<T>) -> Result<BoostedTrees<T>> {
    fit_adaboost_traced(sample, cfg).map(|(m, _)| m)
}

pub fn fit_adaboost_traced<T: Scalar>(
    sample: &Sample<'_, T>,
    cfg: &BoostConfig<T>,
) -> Result<(BoostedTrees<T>, Vec<RoundTrace<T>>)> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::usage("cannot boost on an empty dataset"));
    }
    let n = sample.len();
    let uniform = T::one() / T::of_usize(n);
    let labels = sample.labels();
    let mut weights = vec![uniform; n];
    let mut rng = rng_from_seed(cfg.seed);
    let subsample = if cfg.subsample_fraction < T::one() {
        let k = (cfg.subsample_fraction * T::of_usize(n)).ceil().to_usize().unwrap_or(n);
        Some(k.clamp(1, n))
    } else {
        None
    };

    let mut stages = Vec::new();
    let mut trace = Vec::with_capacity(cfg.n_rounds);
    for round in 1..=cfg.n_rounds {
        let tree = match subsample {
            None => fit_tree(sample, &weights, &cfg.tree)?,
            Some(k) => {
                let mut picked = index::sample_weighted(&mut rng, n, |i| weights[i].to_f64_lossy(), k)
                    .map_err(|e| Error::Invariant(format!("weighted subsample: {e}")))?
                    .into_vec();
                picked.sort_unstable();
                let rows = picked.iter().map(|&i| sample.rows()[i]).collect();
                let sub = Sample::new(sample.data(), rows)?;
                let w = vec![T::one() / T::of_usize(k); k];
                fit_tree(&sub, &w, &cfg.tree)?
            }
        };
        let predictions: Vec<Class> = sample.iter().map(|r| tree.predict(&r.features)).collect();
        let error = compensated_sum(
            weights
                .iter()
                .zip(predictions.iter().zip(&labels))
                .filter(|(_, (g, y))| g != y)
                .map(|(&w, _)| w),
        );
        let retained = error < T::of(0.5);
        if retained {
            let alpha = cfg.shrinkage * alpha_from_error(error);
            weights = update_weights(&weights, alpha, &predictions, &labels)?;
            stages.push(Stage { tree, alpha, error });
        } else {
            log::debug!("round {round}: weighted error {error} >= 0.5, stage dropped");
            weights.fill(uniform);
        }
        trace.push(RoundTrace {
            round,
            error,
            retained,
            weight_sum: compensated_sum(weights.iter().copied()),
            min_weight: weights.iter().copied().fold(T::infinity(), T::min),
        });
    }
    Ok((
        BoostedTrees {
            stages,
            config: cfg.clone(),
        },
        trace,
    ))
}

impl<T: Scalar> BoostedTrees<T> {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// `F_m(x)` using the first `m` stages.
    pub fn score(&self, x: &[FeatureValue<T>], m: usize) -> Result<T> {
        if m > self.stages.len() {
            return Err(Error::usage(format!(
                "stage count {m} exceeds the model's {} stages",
                self.stages.len()
            )));
        }
        Ok(self.stages[..m]
            .iter()
            .fold(T::zero(), |f, s| f + s.alpha * s.tree.predict(x).sign::<T>()))
    }

    /// `F(x)` over all stages.
    pub fn score_all(&self, x: &[FeatureValue<T>]) -> T {
        self.score(x, self.stages.len()).expect("full stage count is in range")
    }

    /// `F_1(x), ..., F_M(x)`.
    pub fn staged_scores<'s>(&'s self, x: &'s [FeatureValue<T>]) -> impl Iterator<Item = T> + 's {
        self.stages.iter().scan(T::zero(), move |f, s| {
            *f += s.alpha * s.tree.predict(x).sign::<T>();
            Some(*f)
        })
    }

    pub fn probability(&self, x: &[FeatureValue<T>]) -> T {
        ccpf(self.score_all(x))
    }

    pub fn predict(&self, x: &[FeatureValue<T>]) -> Class {
        Class::from_score(self.score_all(x))
    }

    /// Keeps exactly the first `m_star` stages.
    pub fn truncate(&self, m_star: usize) -> Result<BoostedTrees<T>> {
        if m_star == 0 || m_star > self.stages.len() {
            return Err(Error::usage(format!(
                "cannot truncate a {}-stage model to {m_star} stages",
                self.stages.len()
            )));
        }
        Ok(BoostedTrees {
            stages: self.stages[..m_star].to_vec(),
            config: self.config.clone(),
        })
    }
}
