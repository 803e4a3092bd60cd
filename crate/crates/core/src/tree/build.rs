//! Greedy top-down fitting on mass-weighted Gini impurity.
//!
//! Numeric candidates are midpoints between consecutive distinct values.
//! Categorical candidates come from sorting the present codes by weighted
//! positive rate and scanning prefixes, which is optimal for a single binary
//! split under Gini.
//!
//! Nodes with exactly two levels of depth budget left and at most
//! [`EXACT_SUBTREE_LIMIT`] candidate splits are solved exactly: every root
//! split (all thresholds, all code subsets) is scored together with the best
//! split of each child, instead of by its own one-step impurity.
//!
//! Candidates are visited in feature order, then threshold order or subset
//! size, and a later candidate wins only if it beats the incumbent by more
//! than a relative tie tolerance.

use rand::seq::index;

use super::{check_lengths, Node, SplitRule, Tree, TreeParams};
use crate::data::{Class, FeatureKind, FeatureValue, Sample};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::scalar::{compensated_sum, Scalar};

/// Candidate-split budget under which a depth-two subtree is searched exactly.
pub const EXACT_SUBTREE_LIMIT: usize = 64;

/// Largest number of present codes for which all subsets are enumerated.
const MAX_ENUMERATED_CODES: usize = 12;

/// Mass-weighted Gini impurity `2·P·N / (P + N)` of a node with total mass
/// `mass` and positive mass `pos`.
#[inline]
pub fn gini_mass<T: Scalar>(mass: T, pos: T) -> T {
    if mass <= T::zero() {
        return T::zero();
    }
    let neg = (mass - pos).max(T::zero());
    let pos = pos.max(T::zero());
    (pos + pos) * neg / mass
}

/// Per-node random feature subsets, as used by random forests.
#[derive(Debug, Clone)]
pub struct FeatureSampler {
    rng: Rng,
    mtry: usize,
}

impl FeatureSampler {
    pub fn new(seed: u64, mtry: usize) -> Self {
        FeatureSampler {
            rng: rng_from_seed(seed),
            mtry,
        }
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    fn draw(&mut self, d: usize) -> Vec<usize> {
        let mut f = index::sample(&mut self.rng, d, self.mtry.min(d)).into_vec();
        f.sort_unstable();
        f
    }
}

pub fn fit_tree<T: Scalar>(sample: &Sample<'_, T>, weights: &[T], params: &TreeParams<T>) -> Result<Tree<T>> {
    fit_tree_with_sampler(sample, weights, params, None)
}

pub fn fit_tree_with_sampler<T: Scalar>(
    sample: &Sample<'_, T>,
    weights: &[T],
    params: &TreeParams<T>,
    sampler: Option<&mut FeatureSampler>,
) -> Result<Tree<T>> {
    params.validate()?;
    if sample.is_empty() {
        return Err(Error::usage("cannot fit a tree to an empty dataset"));
    }
    check_lengths(sample, weights)?;
    if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
        return Err(Error::usage("weights must be finite and non-negative"));
    }
    let total = compensated_sum(weights.iter().copied());
    if (total - T::one()).abs() > T::weight_tolerance() {
        return Err(Error::usage(format!("weights sum to {total}, expected 1")));
    }
    let d = sample.schema().len();
    if let Some(s) = &sampler {
        if s.mtry == 0 || s.mtry > d {
            return Err(Error::usage(format!("mtry = {} outside 1..={d}", s.mtry)));
        }
    }
    let mut b = Builder {
        sample,
        weights,
        params,
        sampler,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(sample.len()),
    };
    b.build((0..sample.len()).collect(), 0);
    Ok(Tree { nodes: b.nodes })
}

#[derive(Debug, Clone)]
struct Candidate<T> {
    feature: usize,
    rule: SplitRule<T>,
    /// Summed impurity of the two children.
    score: T,
}

struct Builder<'b, 'a, T> {
    sample: &'b Sample<'a, T>,
    weights: &'b [T],
    params: &'b TreeParams<T>,
    sampler: Option<&'b mut FeatureSampler>,
    nodes: Vec<Node<T>>,
    scratch: Vec<(T, T, bool)>,
}

#[inline]
fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let t = a + (b - a) / (T::one() + T::one());
    if t < b {
        t
    } else {
        a
    }
}

fn make_leaf<T: Scalar>(mass: T, pos: T) -> Node<T> {
    let class = if pos >= mass - pos {
        Class::Positive
    } else {
        Class::Negative
    };
    let positive_fraction = if mass > T::zero() {
        (pos / mass).max(T::zero()).min(T::one())
    } else {
        T::of(0.5)
    };
    Node::Leaf {
        class,
        positive_fraction,
    }
}

#[inline]
fn offer<T: Scalar>(best: &mut Option<Candidate<T>>, cand: Candidate<T>, tol: T) {
    match best {
        Some(b) if cand.score >= b.score - tol => {}
        _ => *best = Some(cand),
    }
}

impl<T: Scalar> Builder<'_, '_, T> {
    fn stats(&self, rows: &[usize]) -> (T, T) {
        let mut mass = T::zero();
        let mut pos = T::zero();
        for &i in rows {
            let w = self.weights[i];
            mass += w;
            if self.sample.get(i).label.is_positive() {
                pos += w;
            }
        }
        (mass, pos)
    }

    fn splittable(&self, depth: usize, mass: T, pos: T) -> bool {
        depth < self.params.max_depth && gini_mass(mass, pos) > T::zero() && mass >= self.params.min_node_weight
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let (mass, pos) = self.stats(&rows);
        let id = self.nodes.len();
        self.nodes.push(make_leaf(mass, pos));
        if !self.splittable(depth, mass, pos) {
            return id;
        }
        let d = self.sample.schema().len();
        let features: Vec<usize> = match self.sampler.as_deref_mut() {
            Some(s) => s.draw(d),
            None => (0..d).collect(),
        };
        let parent = gini_mass(mass, pos);
        let tol = T::tie_tolerance() * mass;

        let exact = if self.params.max_depth - depth == 2 && self.sampler.is_none() {
            self.exact_root(&rows, &features, depth, parent, tol)
        } else {
            None
        };
        let choice = match exact {
            Some(c) => c,
            None => self
                .best_split(&rows, &features, tol)
                .filter(|c| parent - c.score >= self.params.min_impurity_decrease),
        };
        let Some(c) = choice else {
            return id;
        };
        let (l, r) = self.partition(&rows, c.feature, &c.rule);
        drop(rows);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: c.feature,
            rule: c.rule,
            left,
            right,
        };
        id
    }

    fn partition(&self, rows: &[usize], feature: usize, rule: &SplitRule<T>) -> (Vec<usize>, Vec<usize>) {
        rows.iter()
            .partition(|&&i| rule.goes_left(&self.sample.get(i).features[feature]))
    }

    fn best_split(&mut self, rows: &[usize], features: &[usize], tol: T) -> Option<Candidate<T>> {
        let mut best = None;
        for &j in features {
            match self.sample.schema().kind(j) {
                FeatureKind::Numeric => {
                    self.sort_numeric(rows, j);
                    self.numeric_candidates(j, |c| offer(&mut best, c, tol));
                }
                FeatureKind::Categorical { arity } => {
                    let stats = self.code_stats(rows, j, arity);
                    let mut present: Vec<(u32, T, T)> = stats
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.2 > 0)
                        .map(|(c, s)| (c as u32, s.0, s.1))
                        .collect();
                    let rate = |m: T, p: T| if m > T::zero() { p / m } else { T::of(0.5) };
                    present.sort_by(|a, b| {
                        rate(a.1, a.2)
                            .partial_cmp(&rate(b.1, b.2))
                            .expect("finite rates")
                            .then(a.0.cmp(&b.0))
                    });
                    let (mass, pos) = totals(&present);
                    let (mut lm, mut lp) = (T::zero(), T::zero());
                    for k in 0..present.len().saturating_sub(1) {
                        lm += present[k].1;
                        lp += present[k].2;
                        let score = gini_mass(lm, lp) + gini_mass(mass - lm, pos - lp);
                        let mut codes: Vec<u32> = present[..=k].iter().map(|c| c.0).collect();
                        codes.sort_unstable();
                        offer(
                            &mut best,
                            Candidate {
                                feature: j,
                                rule: SplitRule::LeftCodes(codes),
                                score,
                            },
                            tol,
                        );
                    }
                }
            }
        }
        best
    }

    /// Fills `scratch` with `(value, weight, positive)` sorted by value.
    fn sort_numeric(&mut self, rows: &[usize], j: usize) {
        self.scratch.clear();
        for &i in rows {
            let r = self.sample.get(i);
            let x = match r.features[j] {
                FeatureValue::Numeric(x) => x,
                FeatureValue::Categorical(_) => unreachable!("schema-checked dataset"),
            };
            self.scratch.push((x, self.weights[i], r.label.is_positive()));
        }
        self.scratch
            .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
    }

    /// Emits every threshold candidate over the sorted `scratch`.
    fn numeric_candidates(&self, j: usize, mut emit: impl FnMut(Candidate<T>)) {
        let s = &self.scratch;
        let (mut mass, mut pos) = (T::zero(), T::zero());
        for &(_, w, y) in s {
            mass += w;
            if y {
                pos += w;
            }
        }
        let (mut lm, mut lp) = (T::zero(), T::zero());
        for k in 0..s.len().saturating_sub(1) {
            lm += s[k].1;
            if s[k].2 {
                lp += s[k].1;
            }
            if s[k].0 < s[k + 1].0 {
                let score = gini_mass(lm, lp) + gini_mass(mass - lm, pos - lp);
                emit(Candidate {
                    feature: j,
                    rule: SplitRule::Threshold(midpoint(s[k].0, s[k + 1].0)),
                    score,
                });
            }
        }
    }

    /// Per-code `(mass, positive mass, row count)`.
    fn code_stats(&self, rows: &[usize], j: usize, arity: u32) -> Vec<(T, T, usize)> {
        let mut stats = vec![(T::zero(), T::zero(), 0usize); arity as usize];
        for &i in rows {
            let r = self.sample.get(i);
            let c = match r.features[j] {
                FeatureValue::Categorical(c) => c as usize,
                FeatureValue::Numeric(_) => unreachable!("schema-checked dataset"),
            };
            let w = self.weights[i];
            stats[c].0 += w;
            if r.label.is_positive() {
                stats[c].1 += w;
            }
            stats[c].2 += 1;
        }
        stats
    }

    /// Every candidate split at this node, or `None` when there are more than
    /// [`EXACT_SUBTREE_LIMIT`].
    fn all_candidates(&mut self, rows: &[usize], features: &[usize]) -> Option<Vec<Candidate<T>>> {
        let mut out = Vec::new();
        for &j in features {
            match self.sample.schema().kind(j) {
                FeatureKind::Numeric => {
                    self.sort_numeric(rows, j);
                    let mut over = false;
                    self.numeric_candidates(j, |c| {
                        if out.len() < EXACT_SUBTREE_LIMIT {
                            out.push(c);
                        } else {
                            over = true;
                        }
                    });
                    if over {
                        return None;
                    }
                }
                FeatureKind::Categorical { arity } => {
                    let stats = self.code_stats(rows, j, arity);
                    let present: Vec<(u32, T, T)> = stats
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.2 > 0)
                        .map(|(c, s)| (c as u32, s.0, s.1))
                        .collect();
                    let k = present.len();
                    if k > MAX_ENUMERATED_CODES {
                        return None;
                    }
                    if k < 2 {
                        continue;
                    }
                    let n_subsets = (1usize << k) - 2;
                    if out.len() + n_subsets > EXACT_SUBTREE_LIMIT {
                        return None;
                    }
                    let mut masks: Vec<usize> = (1..(1usize << k) - 1).collect();
                    masks.sort_by_key(|&m| {
                        let codes: Vec<usize> = (0..k).filter(|b| m >> b & 1 == 1).collect();
                        (codes.len(), codes)
                    });
                    let (mass, pos) = totals(&present);
                    for m in masks {
                        let chosen: Vec<&(u32, T, T)> =
                            (0..k).filter(|b| m >> b & 1 == 1).map(|b| &present[b]).collect();
                        let lm = compensated_sum(chosen.iter().map(|c| c.1));
                        let lp = compensated_sum(chosen.iter().map(|c| c.2));
                        out.push(Candidate {
                            feature: j,
                            rule: SplitRule::LeftCodes(chosen.iter().map(|c| c.0).collect()),
                            score: gini_mass(lm, lp) + gini_mass(mass - lm, pos - lp),
                        });
                    }
                }
            }
        }
        Some(out)
    }

    /// Best depth-two subtree root. `None` means the node is too large for
    /// exhaustive search; `Some(None)` means no admissible split exists.
    fn exact_root(
        &mut self,
        rows: &[usize],
        features: &[usize],
        depth: usize,
        parent: T,
        tol: T,
    ) -> Option<Option<Candidate<T>>> {
        let candidates = self.all_candidates(rows, features)?;
        let mut best: Option<(T, Candidate<T>)> = None;
        for c in candidates {
            if parent - c.score < self.params.min_impurity_decrease {
                continue;
            }
            let (l, r) = self.partition(rows, c.feature, &c.rule);
            let total = self.child_value(&l, features, depth + 1) + self.child_value(&r, features, depth + 1);
            match &best {
                Some((b, _)) if total >= *b - tol => {}
                _ => best = Some((total, c)),
            }
        }
        Some(best.map(|(_, c)| c))
    }

    /// Impurity after greedily splitting a node once more (or not at all).
    fn child_value(&mut self, rows: &[usize], features: &[usize], depth: usize) -> T {
        let (mass, pos) = self.stats(rows);
        let own = gini_mass(mass, pos);
        if !self.splittable(depth, mass, pos) {
            return own;
        }
        let tol = T::tie_tolerance() * mass;
        match self.best_split(rows, features, tol) {
            Some(c) if own - c.score >= self.params.min_impurity_decrease => c.score,
            _ => own,
        }
    }
}

fn totals<T: Scalar>(codes: &[(u32, T, T)]) -> (T, T) {
    (
        compensated_sum(codes.iter().map(|c| c.1)),
        compensated_sum(codes.iter().map(|c| c.2)),
    )
}
