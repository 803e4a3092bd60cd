//! Bagged boosted trees.
//!
//! Subjects are dealt into `B` folds. Ensemble `b` is boosted on a bootstrap
//! drawn from the subjects outside fold `b`: each draw picks a subject
//! uniformly with replacement and then one of that subject's records
//! uniformly. The records of fold `b` are out-of-bag for ensemble `b`, so
//! every record is out-of-bag for exactly one ensemble.
//!
//! Out-of-bag misclassifications of `sign(F_m)` are pooled over all
//! ensembles for every stage count `m`; the stage count with the lowest
//! pooled error, `m*`, is applied to every ensemble. Predictions average the
//! ensembles' probabilities `1 / (1 + exp(-2F))`.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaboost::{ccpf, fit_adaboost, BoostConfig, BoostedTrees};
use crate::data::{Class, Dataset, FeatureValue, Sample, SubjectId};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};
use crate::scalar::Scalar;

pub const MAX_BAGS: usize = 1000;

/// How component probabilities are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of the ensembles' probabilities.
    #[default]
    MeanProbability,
    /// Share of ensembles with `F ≥ 0`.
    MajorityVote,
}

/// Number of subject draws per bootstrap sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawCount {
    /// One draw per in-bag subject.
    Subjects,
    /// One draw per in-bag record, so the sample matches the pool in size.
    #[default]
    Records,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BbtConfig<T> {
    /// Number of folds and ensembles `B`, in `[2, 1000]`.
    pub n_bags: usize,
    /// Per-ensemble boosting settings; its `seed` is replaced by one derived
    /// from [`BbtConfig::seed`] and the fold index.
    pub boost: BoostConfig<T>,
    pub seed: u64,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub draws: DrawCount,
}

impl<T: Scalar> Default for BbtConfig<T> {
    fn default() -> Self {
        BbtConfig {
            n_bags: 10,
            boost: BoostConfig::default(),
            seed: 0,
            aggregation: Aggregation::default(),
            draws: DrawCount::default(),
        }
    }
}

impl<T: Scalar> BbtConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_BAGS).contains(&self.n_bags) {
            return Err(Error::usage(format!(
                "number of bags {} outside [2, {MAX_BAGS}]",
                self.n_bags
            )));
        }
        if self.draws == DrawCount::Fixed(0) {
            return Err(Error::usage("bootstrap draw count must be positive"));
        }
        self.boost.validate()
    }

    /// Seed of the fold shuffle.
    pub fn fold_seed(&self) -> u64 {
        derive_seed(self.seed, &[stream::FOLDS])
    }

    /// Seed of ensemble `b`'s bootstrap draw.
    pub fn sample_seed(&self, b: usize) -> u64 {
        derive_seed(self.seed, &[stream::BAG_SAMPLE, b as u64])
    }

    /// Seed of ensemble `b`'s boosting run.
    pub fn boost_seed(&self, b: usize) -> u64 {
        derive_seed(self.seed, &[stream::BAG_BOOST, b as u64])
    }
}

/// Assignment of every subject to one of `n_folds` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub fold_of_subject: IndexMap<SubjectId, usize>,
}

impl FoldPlan {
    pub fn fold(&self, s: &SubjectId) -> Option<usize> {
        self.fold_of_subject.get(s).copied()
    }

    pub fn subjects_in(&self, fold: usize) -> impl Iterator<Item = &SubjectId> {
        self.fold_of_subject
            .iter()
            .filter(move |(_, &f)| f == fold)
            .map(|(s, _)| s)
    }

    pub fn subjects_outside(&self, fold: usize) -> impl Iterator<Item = &SubjectId> {
        self.fold_of_subject
            .iter()
            .filter(move |(_, &f)| f != fold)
            .map(|(s, _)| s)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in self.fold_of_subject.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Pooled out-of-bag prediction error for stage counts `1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PeCurve<T> {
    /// `pe[m - 1]` is the error with `m` stages.
    pub pe: Vec<T>,
    pub n_oob: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BbtModel<T> {
    pub n_bags: usize,
    pub m_star: usize,
    pub config: BbtConfig<T>,
    pub fold_plan: FoldPlan,
    pub ensembles: Vec<BoostedTrees<T>>,
    pub pe_curve: PeCurve<T>,
}

/// Rows each ensemble trained on and was evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct BagReport {
    pub training_rows: Vec<Vec<usize>>,
    pub oob_rows: Vec<Vec<usize>>,
    /// Stage counts before truncation to `m*`.
    pub fitted_stages: Vec<usize>,
}

/// Shuffles subjects with `seed` and deals them round-robin into `n_folds`.
pub fn partition_subjects<T: Scalar>(ds: &Dataset<T>, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    let p = ds.n_subjects();
    if p < 2 {
        return Err(Error::usage(format!("need at least 2 subjects, found {p}")));
    }
    if n_folds < 2 {
        return Err(Error::usage(format!("need at least 2 folds, asked for {n_folds}")));
    }
    if n_folds > p {
        return Err(Error::usage(format!(
            "{n_folds} folds for {p} subjects would leave a fold empty"
        )));
    }
    let mut subjects: Vec<SubjectId> = ds.subjects().cloned().collect();
    subjects.shuffle(&mut rng_from_seed(seed));
    let fold_of_subject = subjects
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i % n_folds))
        .collect();
    Ok(FoldPlan {
        n_folds,
        fold_of_subject,
    })
}

/// Draws `n_draws` subjects uniformly with replacement from `eligible` and
/// one record uniformly from each drawn subject. Returns record positions.
pub fn strategy_s_sample<T: Scalar>(
    ds: &Dataset<T>,
    eligible: &[SubjectId],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    strategy_s_sample_with(ds, eligible, n_draws, &mut rng_from_seed(seed))
}

pub fn strategy_s_sample_with<T: Scalar>(
    ds: &Dataset<T>,
    eligible: &[SubjectId],
    n_draws: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if eligible.is_empty() {
        return Err(Error::usage("no eligible subjects to sample from"));
    }
    let pools: Vec<&[usize]> = eligible
        .iter()
        .map(|s| {
            ds.subject_records(s)
                .filter(|r| !r.is_empty())
                .ok_or_else(|| Error::usage(format!("subject {s} has no records")))
        })
        .collect::<Result<_>>()?;
    Ok((0..n_draws)
        .map(|_| {
            let pool = pools[rng.random_range(0..pools.len())];
            pool[rng.random_range(0..pool.len())]
        })
        .collect())
}

/// Pooled misclassification rate of `sign(F_m)` over every ensemble's
/// out-of-bag rows, for `m = 1..=n_stages`.
pub fn oob_pe_curve<T: Scalar>(
    ds: &Dataset<T>,
    ensembles: &[BoostedTrees<T>],
    oob_rows: &[Vec<usize>],
    n_stages: usize,
) -> Result<PeCurve<T>> {
    if ensembles.len() != oob_rows.len() {
        return Err(Error::usage(format!(
            "{} ensembles but {} out-of-bag sets",
            ensembles.len(),
            oob_rows.len()
        )));
    }
    if n_stages == 0 {
        return Err(Error::usage("PE curve needs at least one stage"));
    }
    if let Some(e) = ensembles.iter().find(|e| e.n_stages() < n_stages) {
        return Err(Error::usage(format!(
            "ensemble has {} stages, curve needs {n_stages}",
            e.n_stages()
        )));
    }
    let n_oob: usize = oob_rows.iter().map(Vec::len).sum();
    if n_oob == 0 {
        return Err(Error::usage("pooled out-of-bag set is empty"));
    }
    let counts: Vec<Vec<usize>> = ensembles
        .par_iter()
        .zip(oob_rows.par_iter())
        .map(|(ens, rows)| {
            let mut wrong = vec![0usize; n_stages];
            for &i in rows {
                let r = ds.record(i);
                for (m, f) in ens.staged_scores(&r.features).take(n_stages).enumerate() {
                    if Class::from_score(f) != r.label {
                        wrong[m] += 1;
                    }
                }
            }
            wrong
        })
        .collect();
    let denom = T::of_usize(n_oob);
    let pe = (0..n_stages)
        .map(|m| T::of_usize(counts.iter().map(|c| c[m]).sum::<usize>()) / denom)
        .collect();
    Ok(PeCurve { pe, n_oob })
}

/// 1-based position of the lowest error; the earliest wins ties.
pub fn select_m_star<T: Scalar>(curve: &PeCurve<T>) -> usize {
    assert!(!curve.pe.is_empty(), "PE curve must not be empty");
    let mut best = 0;
    for (m, &e) in curve.pe.iter().enumerate() {
        if e < curve.pe[best] {
            best = m;
        }
    }
    best + 1
}

pub fn fit_bbt<T: Scalar>(ds: &Dataset<T>, cfg: &BbtConfig<T>) -> Result<BbtModel<T>> {
    fit_bbt_with_report(ds, cfg).map(|(m, _)| m)
}

pub fn fit_bbt_with_report<T: Scalar>(ds: &Dataset<T>, cfg: &BbtConfig<T>) -> Result<(BbtModel<T>, BagReport)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::usage("cannot fit on an empty dataset"));
    }
    let plan = partition_subjects(ds, cfg.n_bags, cfg.fold_seed())?;

    let fitted: Vec<(BoostedTrees<T>, Vec<usize>, Vec<usize>)> = (0..cfg.n_bags)
        .into_par_iter()
        .map(|b| {
            let pool: Vec<SubjectId> = plan.subjects_outside(b).cloned().collect();
            let n_draws = match cfg.draws {
                DrawCount::Subjects => pool.len(),
                DrawCount::Records => pool
                    .iter()
                    .map(|s| ds.subject_records(s).map_or(0, <[usize]>::len))
                    .sum(),
                DrawCount::Fixed(n) => n,
            };
            let rows = strategy_s_sample(ds, &pool, n_draws, cfg.sample_seed(b))?;
            let boost = BoostConfig {
                seed: cfg.boost_seed(b),
                ..cfg.boost.clone()
            };
            let ens = fit_adaboost(&Sample::new(ds, rows.clone())?, &boost)?;
            let oob: Vec<usize> = plan
                .subjects_in(b)
                .flat_map(|s| ds.subject_records(s).unwrap_or(&[]).iter().copied())
                .collect();
            Ok((ens, rows, oob))
        })
        .collect::<Result<_>>()?;

    let mut ensembles = Vec::with_capacity(cfg.n_bags);
    let mut training_rows = Vec::with_capacity(cfg.n_bags);
    let mut oob_rows = Vec::with_capacity(cfg.n_bags);
    for (e, t, o) in fitted {
        ensembles.push(e);
        training_rows.push(t);
        oob_rows.push(o);
    }
    let fitted_stages: Vec<usize> = ensembles.iter().map(BoostedTrees::n_stages).collect();
    let usable = fitted_stages.iter().copied().min().unwrap_or(0);
    if usable == 0 {
        return Err(Error::usage(
            "an ensemble retained no boosting stage; every tree had weighted error >= 0.5",
        ));
    }
    let pe_curve = oob_pe_curve(ds, &ensembles, &oob_rows, usable)?;
    let m_star = select_m_star(&pe_curve);
    let ensembles = ensembles
        .iter()
        .map(|e| e.truncate(m_star))
        .collect::<Result<Vec<_>>>()?;
    let model = BbtModel {
        n_bags: cfg.n_bags,
        m_star,
        config: cfg.clone(),
        fold_plan: plan,
        ensembles,
        pe_curve,
    };
    Ok((
        model,
        BagReport {
            training_rows,
            oob_rows,
            fitted_stages,
        },
    ))
}

impl<T: Scalar> BbtModel<T> {
    /// Aggregated probability of the positive class.
    pub fn probability(&self, x: &[FeatureValue<T>]) -> T {
        let b = T::of_usize(self.ensembles.len());
        match self.config.aggregation {
            Aggregation::MeanProbability => {
                self.ensembles
                    .iter()
                    .map(|e| ccpf(e.score_all(x)))
                    .fold(T::zero(), |a, p| a + p)
                    / b
            }
            Aggregation::MajorityVote => {
                T::of_usize(self.ensembles.iter().filter(|e| e.predict(x).is_positive()).count()) / b
            }
        }
    }

    /// `(p, label)` with label `+1` iff `p ≥ ½`.
    pub fn predict(&self, x: &[FeatureValue<T>]) -> (T, Class) {
        self.predict_at(x, T::of(0.5))
    }

    /// `(p, label)` with label `+1` iff `p ≥ threshold`.
    pub fn predict_at(&self, x: &[FeatureValue<T>], threshold: T) -> (T, Class) {
        let p = self.probability(x);
        let label = if p >= threshold {
            Class::Positive
        } else {
            Class::Negative
        };
        (p, label)
    }

    /// Pooled out-of-bag error at `m*`, the model's error estimate.
    pub fn estimate_pe(&self) -> T {
        self.pe_curve.pe[self.m_star - 1]
    }

    /// Checks the structural invariants of a fitted or loaded model.
    pub fn check(&self) -> Result<()> {
        if self.ensembles.len() != self.n_bags {
            return Err(Error::Invariant(format!(
                "{} ensembles for {} bags",
                self.ensembles.len(),
                self.n_bags
            )));
        }
        if self.ensembles.iter().any(|e| e.n_stages() != self.m_star) {
            return Err(Error::Invariant("ensembles not truncated to m*".into()));
        }
        if self.pe_curve.pe.is_empty() || select_m_star(&self.pe_curve) != self.m_star {
            return Err(Error::Invariant("m* is not the PE curve's argmin".into()));
        }
        Ok(())
    }
}
