//! Naive-Bayes tree: a gain-ratio tree with Gaussian naive-Bayes leaves.

use serde::{Deserialize, Serialize};

use super::model::TrainedModel;
use super::tree::{self, FeatureSampler, GrowParams};
use super::{ClassifierConfig, ClassifierError, ClassifierKind, Dataset, Trainer};

/// Smallest variance added to every per-class feature variance, relative to
/// the largest variance in the leaf (and never below this absolute value).
pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbtParams {
    /// Nodes with fewer instances stop splitting and fit a naive-Bayes leaf.
    pub min_leaf_for_nb: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for NbtParams {
    fn default() -> Self {
        Self {
            min_leaf_for_nb: 30,
            min_leaf: 2,
            max_depth: None,
        }
    }
}

impl Trainer for NbtParams {
    fn kind(&self) -> ClassifierKind {
        ClassifierKind::NaiveBayesTree
    }

    fn train(&self, data: &Dataset) -> Result<TrainedModel, ClassifierError> {
        data.check_trainable()?;
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidParam(
                "min_leaf must be at least 1".into(),
            ));
        }
        let all: Vec<usize> = (0..data.len()).collect();
        let fit =
            |d: &Dataset, idx: &[usize], counts: [f64; 2]| NaiveBayesLeaf::fit(d, idx, counts);
        let tree = tree::grow(
            data,
            all,
            &GrowParams {
                min_leaf: self.min_leaf,
                min_split: self.min_leaf_for_nb.max(2 * self.min_leaf),
                max_depth: self.max_depth,
            },
            &mut FeatureSampler::<rand_chacha::ChaCha8Rng>::All,
            Some(&fit),
        );
        Ok(TrainedModel::new(
            ClassifierConfig::NaiveBayesTree(self.clone()),
            vec![tree],
            data.feature_names().to_vec(),
            0,
        ))
    }
}

/// Gaussian naive-Bayes model of one leaf. Arrays are indexed by class,
/// benign then malware; inner vectors by feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesLeaf {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Population variances with the floor already added.
    pub variances: [Vec<f64>; 2],
}

impl NaiveBayesLeaf {
    /// Fits the leaf holding rows `idx`; `None` unless both classes occur.
    pub(crate) fn fit(data: &Dataset, idx: &[usize], counts: [f64; 2]) -> Option<Self> {
        if counts[0] == 0.0 || counts[1] == 0.0 {
            return None;
        }
        let m = data.n_features();
        let mut means = [vec![0.0; m], vec![0.0; m]];
        for &i in idx {
            let c = data.labels()[i].index();
            for (mu, x) in means[c].iter_mut().zip(&data.vectors()[i]) {
                *mu += x;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|mu| *mu /= counts[c]);
        }
        let mut variances = [vec![0.0; m], vec![0.0; m]];
        for &i in idx {
            let c = data.labels()[i].index();
            for f in 0..m {
                let d = data.vectors()[i][f] - means[c][f];
                variances[c][f] += d * d;
            }
        }
        let mut largest: f64 = 0.0;
        for c in 0..2 {
            for v in variances[c].iter_mut() {
                *v /= counts[c];
                largest = largest.max(*v);
            }
        }
        let floor = VARIANCE_FLOOR * largest.max(1.0);
        for v in variances.iter_mut().flatten() {
            *v += floor;
        }
        let n = counts[0] + counts[1];
        Some(Self {
            priors: [(counts[0] + 1.0) / (n + 2.0), (counts[1] + 1.0) / (n + 2.0)],
            means,
            variances,
        })
    }

    /// Class posteriors for `x`, benign then malware.
    pub fn posterior(&self, x: &[f64]) -> [f64; 2] {
        let mut log_joint = [0.0; 2];
        for (c, lj) in log_joint.iter_mut().enumerate() {
            *lj = self.priors[c].ln();
            for (f, &xf) in x.iter().enumerate() {
                let var = self.variances[c][f];
                let d = xf - self.means[c][f];
                *lj -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
            }
        }
        let top = log_joint[0].max(log_joint[1]);
        let e = [(log_joint[0] - top).exp(), (log_joint[1] - top).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.priors.iter().any(|p| !(p.is_finite() && *p > 0.0))
            || (self.priors.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err("bad naive-Bayes priors".into());
        }
        for c in 0..2 {
            if self.means[c].len() != n_features || self.variances[c].len() != n_features {
                return Err("naive-Bayes leaf has wrong dimension".into());
            }
            if self.means[c].iter().any(|m| !m.is_finite())
                || self.variances[c]
                    .iter()
                    .any(|v| !(v.is_finite() && *v > 0.0))
            {
                return Err("bad naive-Bayes parameters".into());
            }
        }
        Ok(())
    }
}
