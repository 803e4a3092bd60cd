//! Baselines, a common model type, and the subject-count sweep.

mod baselines;
mod sweep;

pub use baselines::{
    default_mtry, fit_bagging, fit_bb_combine, fit_random_forest, fit_single_tree, ProbEnsemble, VoteEnsemble,
    DEFAULT_SCT_DEPTH,
};
pub use sweep::{
    format_table, run_sweep, split_by_subject, summarize, write_log_csv, write_summary_csv, PeRecord, SummaryRow,
    SweepConfig, SweepResult,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaboost::{ccpf, fit_adaboost, BoostConfig, BoostedTrees};
use crate::bbt::{fit_bbt, BbtConfig, BbtModel, DrawCount};
use crate::data::{Class, Dataset, FeatureValue, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Sct,
    Bagging,
    Boosting,
    RandomForest,
    BbCombine,
    Bbt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sct,
        Algorithm::Bagging,
        Algorithm::Boosting,
        Algorithm::RandomForest,
        Algorithm::BbCombine,
        Algorithm::Bbt,
    ];

    /// Short command-line name.
    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Sct => "sct",
            Algorithm::Bagging => "bagging",
            Algorithm::Boosting => "boosting",
            Algorithm::RandomForest => "rf",
            Algorithm::BbCombine => "bbcombine",
            Algorithm::Bbt => "bbt",
        }
    }

    /// Report label.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Sct => "SCT",
            Algorithm::Bagging => "Bagging",
            Algorithm::Boosting => "Boosting",
            Algorithm::RandomForest => "Random Forest",
            Algorithm::BbCombine => "B&B Combine",
            Algorithm::Bbt => "BBT",
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::usage(format!(
                    "unknown algorithm `{s}` (expected one of sct, bagging, boosting, rf, bbcombine, bbt)"
                ))
            })
    }
}

/// Hyperparameters for every algorithm in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoParams<T> {
    pub sct: TreeParams<T>,
    pub bagging_trees: usize,
    pub bagging_tree: TreeParams<T>,
    pub rf_trees: usize,
    pub rf_mtry: Option<usize>,
    pub rf_tree: TreeParams<T>,
    /// Shared by Boosting, B&B Combine and each BBT ensemble.
    pub boost: BoostConfig<T>,
    /// `B` for BBT and B&B Combine.
    pub bags: usize,
    pub bbt_draws: DrawCount,
}

impl<T: Scalar> Default for AlgoParams<T> {
    fn default() -> Self {
        AlgoParams {
            sct: TreeParams::with_depth(DEFAULT_SCT_DEPTH),
            bagging_trees: 50,
            bagging_tree: TreeParams::with_depth(12),
            rf_trees: 50,
            rf_mtry: None,
            rf_tree: TreeParams::with_depth(12),
            boost: BoostConfig::default(),
            bags: 10,
            bbt_draws: DrawCount::default(),
        }
    }
}

/// Any fitted model of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "model", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum TrainedModel<T> {
    Sct(Tree<T>),
    Bagging(VoteEnsemble<T>),
    RandomForest(VoteEnsemble<T>),
    Boosting(BoostedTrees<T>),
    BbCombine(ProbEnsemble<T>),
    Bbt(BbtModel<T>),
}

impl<T: Scalar> TrainedModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Sct(_) => Algorithm::Sct,
            TrainedModel::Bagging(_) => Algorithm::Bagging,
            TrainedModel::RandomForest(_) => Algorithm::RandomForest,
            TrainedModel::Boosting(_) => Algorithm::Boosting,
            TrainedModel::BbCombine(_) => Algorithm::BbCombine,
            TrainedModel::Bbt(_) => Algorithm::Bbt,
        }
    }

    /// Estimated probability of the positive class: leaf share for a tree,
    /// vote share for bagging/forests, the logistic link for boosted models.
    pub fn probability(&self, x: &[FeatureValue<T>]) -> T {
        match self {
            TrainedModel::Sct(t) => t.positive_fraction(x),
            TrainedModel::Bagging(e) | TrainedModel::RandomForest(e) => e.probability(x),
            TrainedModel::Boosting(b) => ccpf(b.score_all(x)),
            TrainedModel::BbCombine(e) => e.probability(x),
            TrainedModel::Bbt(m) => m.probability(x),
        }
    }

    /// The model's own decision rule.
    pub fn predict(&self, x: &[FeatureValue<T>]) -> Class {
        match self {
            TrainedModel::Sct(t) => t.predict(x),
            TrainedModel::Bagging(e) | TrainedModel::RandomForest(e) => e.predict(x),
            TrainedModel::Boosting(b) => b.predict(x),
            TrainedModel::BbCombine(_) | TrainedModel::Bbt(_) => self.predict_at(x, T::of(0.5)),
        }
    }

    /// `+1` iff the probability is at least `threshold`.
    pub fn predict_at(&self, x: &[FeatureValue<T>], threshold: T) -> Class {
        if self.probability(x) >= threshold {
            Class::Positive
        } else {
            Class::Negative
        }
    }
}

/// Fits `algorithm` on `train`. `seed` overrides every seed in `params`.
pub fn fit_algorithm<T: Scalar>(
    algorithm: Algorithm,
    train: &Dataset<T>,
    params: &AlgoParams<T>,
    seed: u64,
) -> Result<TrainedModel<T>> {
    let boost = BoostConfig {
        seed,
        ..params.boost.clone()
    };
    Ok(match algorithm {
        Algorithm::Sct => TrainedModel::Sct(fit_single_tree(train, &params.sct)?),
        Algorithm::Bagging => {
            TrainedModel::Bagging(fit_bagging(train, params.bagging_trees, &params.bagging_tree, seed)?)
        }
        Algorithm::RandomForest => TrainedModel::RandomForest(fit_random_forest(
            train,
            params.rf_trees,
            params.rf_mtry,
            &params.rf_tree,
            seed,
        )?),
        Algorithm::Boosting => TrainedModel::Boosting(fit_adaboost(&Sample::full(train), &boost)?),
        Algorithm::BbCombine => TrainedModel::BbCombine(fit_bb_combine(train, params.bags, &boost, seed)?),
        Algorithm::Bbt => {
            let cfg = BbtConfig {
                n_bags: params.bags,
                boost,
                seed,
                draws: params.bbt_draws,
                ..BbtConfig::default()
            };
            TrainedModel::Bbt(fit_bbt(train, &cfg)?)
        }
    })
}

/// Fraction of `test` records misclassified by `predict`.
pub fn evaluate_pe<T: Scalar>(predict: impl Fn(&[FeatureValue<T>]) -> Class, test: &Dataset<T>) -> Result<T> {
    if test.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty test set"));
    }
    let wrong = test
        .records()
        .iter()
        .filter(|r| predict(&r.features) != r.label)
        .count();
    Ok(T::of_usize(wrong) / T::of_usize(test.len()))
}
