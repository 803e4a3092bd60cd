//! Comparator learners: a single tree, bagged trees, a random forest, and
//! bagged AdaBoost ensembles on observation-level bootstraps.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaboost::{ccpf, fit_adaboost, BoostConfig, BoostedTrees};
use crate::data::{Class, Dataset, FeatureValue, Sample};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::scalar::Scalar;
use crate::tree::{fit_tree, fit_tree_with_sampler, FeatureSampler, Tree, TreeParams};

pub const DEFAULT_SCT_DEPTH: usize = 6;

fn uniform<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::one() / T::of_usize(n); n]
}

/// `n` record positions drawn uniformly with replacement.
fn bootstrap_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// A single tree grown with uniform weights.
pub fn fit_single_tree<T: Scalar>(ds: &Dataset<T>, params: &TreeParams<T>) -> Result<Tree<T>> {
    fit_tree(&Sample::full(ds), &uniform(ds.len()), params)
}

/// Unweighted majority vote over trees; ties go to `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct VoteEnsemble<T> {
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> VoteEnsemble<T> {
    /// Share of trees voting `+1`.
    pub fn probability(&self, x: &[FeatureValue<T>]) -> T {
        let pos = self.trees.iter().filter(|t| t.predict(x).is_positive()).count();
        T::of_usize(pos) / T::of_usize(self.trees.len())
    }

    pub fn predict(&self, x: &[FeatureValue<T>]) -> Class {
        let pos = self.trees.iter().filter(|t| t.predict(x).is_positive()).count();
        if 2 * pos >= self.trees.len() {
            Class::Positive
        } else {
            Class::Negative
        }
    }
}

pub fn fit_bagging<T: Scalar>(
    ds: &Dataset<T>,
    n_trees: usize,
    params: &TreeParams<T>,
    seed: u64,
) -> Result<VoteEnsemble<T>> {
    fit_forest(ds, n_trees, None, params, seed)
}

/// Default number of features tried per split, `⌈√d⌉`.
pub fn default_mtry(d: usize) -> usize {
    (d as f64).sqrt().ceil() as usize
}

pub fn fit_random_forest<T: Scalar>(
    ds: &Dataset<T>,
    n_trees: usize,
    mtry: Option<usize>,
    params: &TreeParams<T>,
    seed: u64,
) -> Result<VoteEnsemble<T>> {
    let d = ds.schema().len();
    let mtry = mtry.unwrap_or_else(|| default_mtry(d));
    if mtry == 0 || mtry > d {
        return Err(Error::usage(format!("mtry = {mtry} outside 1..={d}")));
    }
    // Trying every feature is plain bagging.
    let mtry = (mtry < d).then_some(mtry);
    fit_forest(ds, n_trees, mtry, params, seed)
}

fn fit_forest<T: Scalar>(
    ds: &Dataset<T>,
    n_trees: usize,
    mtry: Option<usize>,
    params: &TreeParams<T>,
    seed: u64,
) -> Result<VoteEnsemble<T>> {
    if ds.is_empty() {
        return Err(Error::usage("cannot fit on an empty dataset"));
    }
    if n_trees == 0 {
        return Err(Error::usage("ensemble needs at least one tree"));
    }
    let n = ds.len();
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let rows = bootstrap_rows(n, derive_seed(seed, &[stream::TREE, t as u64]));
            let sample = Sample::new(ds, rows)?;
            let mut sampler = mtry.map(|m| FeatureSampler::new(derive_seed(seed, &[stream::SPLIT, t as u64]), m));
            fit_tree_with_sampler(&sample, &uniform(n), params, sampler.as_mut())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VoteEnsemble { trees })
}

/// Boosted ensembles averaged through their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ProbEnsemble<T> {
    pub members: Vec<BoostedTrees<T>>,
}

impl<T: Scalar> ProbEnsemble<T> {
    pub fn probability(&self, x: &[FeatureValue<T>]) -> T {
        self.members
            .iter()
            .map(|m| ccpf(m.score_all(x)))
            .fold(T::zero(), |a, p| a + p)
            / T::of_usize(self.members.len())
    }
}

/// `n_bags` AdaBoost runs, each on an observation-level bootstrap, keeping
/// all stages.
pub fn fit_bb_combine<T: Scalar>(
    ds: &Dataset<T>,
    n_bags: usize,
    boost: &BoostConfig<T>,
    seed: u64,
) -> Result<ProbEnsemble<T>> {
    if ds.is_empty() {
        return Err(Error::usage("cannot fit on an empty dataset"));
    }
    if n_bags == 0 {
        return Err(Error::usage("need at least one bag"));
    }
    let n = ds.len();
    let members = (0..n_bags)
        .into_par_iter()
        .map(|b| {
            let rows = bootstrap_rows(n, derive_seed(seed, &[stream::BAG_SAMPLE, b as u64]));
            let cfg = BoostConfig {
                seed: derive_seed(seed, &[stream::BAG_BOOST, b as u64]),
                ..boost.clone()
            };
            fit_adaboost(&Sample::new(ds, rows)?, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbEnsemble { members })
}
