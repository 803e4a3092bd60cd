//! Weighted binary classification trees over mixed numeric and categorical
//! features. These are the base learners for every ensemble in the crate.
//!
//! Nodes live in an arena with the root at index 0. A split routes a record
//! left when its numeric value is `<= threshold`, or when its categorical
//! code belongs to `left_codes`; everything else (including codes never
//! seen in training) goes right.

mod build;
mod repr;

pub use build::{fit_tree, fit_tree_with_sampler, gini_mass, FeatureSampler, EXACT_SUBTREE_LIMIT};

use crate::data::{Class, FeatureValue, Sample};
use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams<T> {
    /// Maximum number of splits on any root-to-leaf path.
    pub max_depth: usize,
    /// Nodes lighter than this are not split.
    pub min_node_weight: T,
    /// A split must reduce mass-weighted Gini impurity by at least this much.
    pub min_impurity_decrease: T,
}

impl<T: Scalar> TreeParams<T> {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeParams {
            max_depth,
            ..Self::default()
        }
    }

    // Negated comparisons so that NaN thresholds are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::usage("max_depth must be at least 1"));
        }
        if !(self.min_node_weight >= T::zero()) || !(self.min_impurity_decrease >= T::zero()) {
            return Err(Error::usage("tree thresholds must be non-negative"));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for TreeParams<T> {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_node_weight: T::zero(),
            min_impurity_decrease: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule<T> {
    Threshold(T),
    /// Sorted codes routed left.
    LeftCodes(Vec<u32>),
}

impl<T: Scalar> SplitRule<T> {
    #[inline]
    pub fn goes_left(&self, v: &FeatureValue<T>) -> bool {
        match (self, v) {
            (SplitRule::Threshold(t), FeatureValue::Numeric(x)) => *x <= *t,
            (SplitRule::LeftCodes(set), FeatureValue::Categorical(c)) => set.binary_search(c).is_ok(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Split {
        feature: usize,
        rule: SplitRule<T>,
        left: usize,
        right: usize,
    },
    Leaf {
        class: Class,
        /// Weighted share of positives among the training mass in the leaf.
        positive_fraction: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(class: Class, positive_fraction: T) -> Self {
        Tree {
            nodes: vec![Node::Leaf {
                class,
                positive_fraction,
            }],
        }
    }

    /// Builds a tree from an arena, checking that it is a proper binary tree
    /// rooted at index 0.
    pub fn from_nodes(nodes: Vec<Node<T>>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::usage("tree has no nodes"));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(Error::usage(format!("node {i} reachable twice")));
            }
            seen[i] = true;
            match &nodes[i] {
                Node::Split { left, right, rule, .. } => {
                    for &c in [left, right] {
                        if c >= nodes.len() || c == 0 {
                            return Err(Error::usage(format!("node {i} has invalid child {c}")));
                        }
                        stack.push(c);
                    }
                    if let SplitRule::LeftCodes(codes) = rule {
                        if codes.is_empty() || codes.windows(2).any(|w| w[0] >= w[1]) {
                            return Err(Error::usage(format!("node {i} has an invalid code set")));
                        }
                    }
                }
                Node::Leaf { positive_fraction, .. } => {
                    if !(*positive_fraction >= T::zero() && *positive_fraction <= T::one()) {
                        return Err(Error::usage(format!("node {i} has fraction outside [0, 1]")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::usage("tree has unreachable nodes"));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    fn leaf_index(&self, x: &[FeatureValue<T>]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => {
                    let go_left = x.get(*feature).is_some_and(|v| rule.goes_left(v));
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// `g(x)`: the class of the leaf reached by `x`.
    pub fn predict(&self, x: &[FeatureValue<T>]) -> Class {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn positive_fraction(&self, x: &[FeatureValue<T>]) -> T {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { positive_fraction, .. } => *positive_fraction,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Mass-weighted Gini impurity summed over leaves, with the sample routed
    /// through the tree and carrying `weights`.
    pub fn training_impurity(&self, sample: &Sample<'_, T>, weights: &[T]) -> Result<T> {
        check_lengths(sample, weights)?;
        let mut mass = vec![(T::zero(), T::zero()); self.nodes.len()];
        for (r, &w) in sample.iter().zip(weights) {
            let leaf = self.leaf_index(&r.features);
            mass[leaf].0 += w;
            if r.label.is_positive() {
                mass[leaf].1 += w;
            }
        }
        Ok(compensated_sum(mass.into_iter().map(|(m, p)| gini_mass(m, p))))
    }
}

fn check_lengths<T: Scalar>(sample: &Sample<'_, T>, weights: &[T]) -> Result<()> {
    if weights.len() != sample.len() {
        return Err(Error::usage(format!(
            "{} weights for {} records",
            weights.len(),
            sample.len()
        )));
    }
    Ok(())
}

/// `ε = Σ w_i · I{y_i ≠ g(x_i)}`.
pub fn weighted_error<T: Scalar>(tree: &Tree<T>, sample: &Sample<'_, T>, weights: &[T]) -> Result<T> {
    check_lengths(sample, weights)?;
    Ok(compensated_sum(
        sample
            .iter()
            .zip(weights)
            .filter(|(r, _)| tree.predict(&r.features) != r.label)
            .map(|(_, &w)| w),
    ))
}
