//! Gain-ratio tree induction shared by every learner.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature. The split with the highest gain ratio wins; candidates within
//! [`GAIN_TIE_TOLERANCE`] of the best are ties, resolved by lower feature index
//! and then lower threshold. Splits need strictly positive information gain
//! and at least `min_leaf` instances on each side.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::TrainedModel;
use super::nbt::NaiveBayesLeaf;
use super::{ClassifierConfig, ClassifierError, ClassifierKind, Dataset, Trainer};
use crate::label::Label;

/// Gain ratios closer than this to the maximum count as tied.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;
/// Information gain must exceed this for a split to be taken.
pub const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionTreeParams {
    pub min_leaf: usize,
    /// `None` means unlimited.
    pub max_depth: Option<usize>,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 2,
            max_depth: None,
        }
    }
}

impl Trainer for DecisionTreeParams {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::DecisionTree
    }

    fn train(&self, data: &Dataset) -> Result<TrainedModel, ClassifierError> {
        data.check_trainable()?;
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidParam(
                "min_leaf must be at least 1".into(),
            ));
        }
        let all: Vec<usize> = (0..data.len()).collect();
        let tree = grow(
            data,
            all,
            &GrowParams {
                min_leaf: self.min_leaf,
                min_split: 2 * self.min_leaf,
                max_depth: self.max_depth,
            },
            &mut FeatureSampler::<rand_chacha::ChaCha8Rng>::All,
            None,
        );
        Ok(TrainedModel::new(
            ClassifierConfig::DecisionTree(self.clone()),
            vec![tree],
            data.feature_names().to_vec(),
            0,
        ))
    }
}

/// One tree node. Internal nodes send `value <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training instances per class, benign then malware.
        counts: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        naive_bayes: Option<NaiveBayesLeaf>,
    },
}

/// Nodes in an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Index of the leaf `x` lands in.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                TreeNode::Leaf { .. } => return i,
            }
        }
    }

    pub fn leaf(&self, x: &[f64]) -> &TreeNode {
        &self.nodes[self.leaf_index(x)]
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Internal { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    /// Checks child links and feature indices; used when loading models.
    pub(crate) fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("node {i} reached twice"));
            }
            match &self.nodes[i] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features || !threshold.is_finite() {
                        return Err(format!("node {i}: bad split"));
                    }
                    for &c in [left, right] {
                        if c >= self.nodes.len() || c <= i {
                            return Err(format!("node {i}: bad child {c}"));
                        }
                        stack.push(c);
                    }
                }
                TreeNode::Leaf {
                    counts,
                    naive_bayes,
                } => {
                    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return Err(format!("node {i}: bad counts"));
                    }
                    if let Some(nb) = naive_bayes {
                        nb.validate(n_features)
                            .map_err(|e| format!("node {i}: {e}"))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Malware share of a leaf's training instances; 0.5 for an empty leaf.
pub(crate) fn leaf_fraction(counts: &[f64; 2]) -> f64 {
    let total = counts[0] + counts[1];
    if total > 0.0 {
        counts[1] / total
    } else {
        0.5
    }
}

pub(crate) struct GrowParams {
    pub min_leaf: usize,
    /// Nodes with fewer instances become leaves.
    pub min_split: usize,
    pub max_depth: Option<usize>,
}

/// Which features a node may split on.
pub(crate) enum FeatureSampler<'r, R: Rng> {
    All,
    Random { mtry: usize, rng: &'r mut R },
}

impl<R: Rng> FeatureSampler<'_, R> {
    fn candidates(&mut self, m: usize) -> Vec<usize> {
        match self {
            FeatureSampler::Random { mtry, rng } if *mtry < m => {
                let mut f = rand::seq::index::sample(*rng, m, *mtry).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..m).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain_ratio: f64,
}

fn entropy(counts: [f64; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain and split information of a binary partition.
pub fn gain_and_split_info(left: [f64; 2], right: [f64; 2]) -> (f64, f64) {
    let nl = left[0] + left[1];
    let nr = right[0] + right[1];
    let n = nl + nr;
    let parent = [left[0] + right[0], left[1] + right[1]];
    let gain = entropy(parent) - (nl / n) * entropy(left) - (nr / n) * entropy(right);
    let split_info = entropy([nl, nr]);
    (gain, split_info)
}

fn class_counts(labels: &[Label], idx: &[usize]) -> [f64; 2] {
    let mut c = [0f64; 2];
    for &i in idx {
        c[labels[i].index()] += 1.0;
    }
    c
}

/// Every admissible `(feature, midpoint)` split of the rows at `idx`
/// restricted to `features`, in feature then threshold order.
pub(crate) fn enumerate_splits(
    data: &Dataset,
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Vec<SplitCandidate> {
    let labels = data.labels();
    let total = class_counts(labels, idx);
    let n = idx.len();
    let mut out = Vec::new();
    let mut column: Vec<(f64, Label)> = Vec::with_capacity(n);
    for &f in features {
        column.clear();
        column.extend(idx.iter().map(|&i| (data.vectors()[i][f], labels[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = [0f64; 2];
        for k in 0..n.saturating_sub(1) {
            left[column[k].1.index()] += 1.0;
            let (lo, hi) = (column[k].0, column[k + 1].0);
            if lo == hi {
                continue;
            }
            let nl = k + 1;
            if nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let (gain, split_info) = gain_and_split_info(left, right);
            if gain <= MIN_GAIN || split_info <= 0.0 {
                continue;
            }
            out.push(SplitCandidate {
                feature: f,
                threshold: midpoint(lo, hi),
                gain_ratio: gain / split_info,
            });
        }
    }
    out
}

/// Midpoint of `lo < hi`, falling back to `lo` when the two are adjacent
/// floats and the midpoint would round onto `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Highest gain ratio with the documented tie-break.
pub(crate) fn choose_split(candidates: &[SplitCandidate]) -> Option<SplitCandidate> {
    let best = candidates
        .iter()
        .map(|c| c.gain_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .filter(|c| c.gain_ratio >= best - GAIN_TIE_TOLERANCE)
        .min_by(|a, b| {
            a.feature
                .cmp(&b.feature)
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .copied()
}

/// Root split the inducer would choose on the whole dataset.
pub fn best_root_split(data: &Dataset, min_leaf: usize) -> Option<SplitCandidate> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let features: Vec<usize> = (0..data.n_features()).collect();
    choose_split(&enumerate_splits(data, &idx, &features, min_leaf))
}

/// Grows one tree over the (possibly repeated) rows in `idx`.
///
/// `leaf_model` fits an optional naive-Bayes model per leaf.
/// Fits the optional model of a leaf from its rows and class counts.
pub(crate) type LeafModel = dyn Fn(&Dataset, &[usize], [f64; 2]) -> Option<NaiveBayesLeaf>;

pub(crate) fn grow<R: Rng>(
    data: &Dataset,
    idx: Vec<usize>,
    params: &GrowParams,
    sampler: &mut FeatureSampler<'_, R>,
    leaf_model: Option<&LeafModel>,
) -> Tree {
    struct Work {
        node: usize,
        idx: Vec<usize>,
        depth: usize,
    }

    let placeholder = || TreeNode::Leaf {
        counts: [0.0; 2],
        naive_bayes: None,
    };
    let mut nodes = vec![placeholder()];
    let mut stack = vec![Work {
        node: 0,
        idx,
        depth: 0,
    }];
    let m = data.n_features();

    while let Some(Work { node, idx, depth }) = stack.pop() {
        let counts = class_counts(data.labels(), &idx);
        let pure = counts[0] == 0.0 || counts[1] == 0.0;
        let stop =
            pure || idx.len() < params.min_split || params.max_depth.is_some_and(|d| depth >= d);

        let split = if stop {
            None
        } else {
            let features = sampler.candidates(m);
            choose_split(&enumerate_splits(data, &idx, &features, params.min_leaf))
        };

        let Some(split) = split else {
            nodes[node] = TreeNode::Leaf {
                counts,
                naive_bayes: leaf_model.and_then(|f| f(data, &idx, counts)),
            };
            continue;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| data.vectors()[i][split.feature] <= split.threshold);
        let left = nodes.len();
        nodes.push(placeholder());
        nodes.push(placeholder());
        nodes[node] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right: left + 1,
        };
        stack.push(Work {
            node: left + 1,
            idx: right_idx,
            depth: depth + 1,
        });
        stack.push(Work {
            node: left,
            idx: left_idx,
            depth: depth + 1,
        });
    }
    Tree { nodes }
}
