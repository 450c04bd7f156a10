//! Tree classifiers behind one train/predict/save/load contract.
//!
//! Three learners share the gain-ratio tree inducer in [`tree`]:
//! a C4.5-style [decision tree](DecisionTreeParams), a bagged
//! [random forest](RandomForestParams) and a [naive-Bayes tree](NbtParams)
//! whose leaves hold Gaussian naive-Bayes models. New learners plug in by
//! implementing [`Trainer`] and adding a [`ClassifierConfig`] variant.

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::label::Label;

mod forest;
mod model;
mod nbt;
pub mod tree;

pub use forest::{default_mtry, RandomForestParams};
pub use model::{
    decode_model, encode_model, load_model, save_model, Prediction, SelectionProvenance,
    TrainedModel, MODEL_FORMAT_VERSION,
};
pub use nbt::{NaiveBayesLeaf, NbtParams, VARIANCE_FLOOR};
pub use tree::{
    best_root_split, gain_and_split_info, DecisionTreeParams, SplitCandidate, Tree, TreeNode,
};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature values must be finite")]
    NonFinite,
    #[error("unsupported classifier {0:?} (supported: dt, rf, nbt)")]
    UnsupportedClassifier(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("model format version {found} is newer than supported version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

/// Feature vectors with parallel labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vectors: Vec<Vec<f64>>,
    labels: Vec<Label>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        vectors: Vec<Vec<f64>>,
        labels: Vec<Label>,
        feature_names: Vec<String>,
    ) -> Result<Self, ClassifierError> {
        if vectors.len() != labels.len() {
            return Err(ClassifierError::InvalidParam(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        let m = feature_names.len();
        for v in &vectors {
            if v.len() != m {
                return Err(ClassifierError::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ClassifierError::NonFinite);
            }
        }
        Ok(Self {
            vectors,
            labels,
            feature_names,
        })
    }

    /// Dataset with generated names `f0..f{m-1}`.
    pub fn unnamed(vectors: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, ClassifierError> {
        let m = vectors.first().map_or(0, Vec::len);
        Self::new(vectors, labels, (0..m).map(|i| format!("f{i}")).collect())
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub(crate) fn check_trainable(&self) -> Result<(), ClassifierError> {
        if self.is_empty() {
            return Err(ClassifierError::EmptyDataset);
        }
        if self.n_features() == 0 {
            return Err(ClassifierError::InvalidParam("no features".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree,
    RandomForest,
    NaiveBayesTree,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::NaiveBayesTree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "dt",
            ClassifierKind::RandomForest => "rf",
            ClassifierKind::NaiveBayesTree => "nbt",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dt" | "j48" | "decision-tree" | "c45" => Ok(ClassifierKind::DecisionTree),
            "rf" | "random-forest" => Ok(ClassifierKind::RandomForest),
            "nbt" | "naive-bayes-tree" => Ok(ClassifierKind::NaiveBayesTree),
            _ => Err(ClassifierError::UnsupportedClassifier(s.to_string())),
        }
    }
}

/// A learner: consumes a dataset, yields a model.
pub trait Trainer {
    fn kind(&self) -> ClassifierKind;
    fn train(&self, data: &Dataset) -> Result<TrainedModel, ClassifierError>;
}

/// Hyperparameters of any supported learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    DecisionTree(DecisionTreeParams),
    RandomForest(RandomForestParams),
    NaiveBayesTree(NbtParams),
}

impl ClassifierConfig {
    /// Default hyperparameters for `kind`.
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::DecisionTree => {
                ClassifierConfig::DecisionTree(DecisionTreeParams::default())
            }
            ClassifierKind::RandomForest => {
                ClassifierConfig::RandomForest(RandomForestParams::default())
            }
            ClassifierKind::NaiveBayesTree => {
                ClassifierConfig::NaiveBayesTree(NbtParams::default())
            }
        }
    }

    /// Same hyperparameters with the random seed replaced (no-op for
    /// deterministic learners).
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            ClassifierConfig::RandomForest(p) => {
                ClassifierConfig::RandomForest(RandomForestParams { seed, ..p.clone() })
            }
            other => other.clone(),
        }
    }

    fn trainer(&self) -> &dyn Trainer {
        match self {
            ClassifierConfig::DecisionTree(p) => p,
            ClassifierConfig::RandomForest(p) => p,
            ClassifierConfig::NaiveBayesTree(p) => p,
        }
    }
}

impl Trainer for ClassifierConfig {
    fn kind(&self) -> ClassifierKind {
        self.trainer().kind()
    }

    fn train(&self, data: &Dataset) -> Result<TrainedModel, ClassifierError> {
        self.trainer().train(data)
    }
}

pub fn train_decision_tree(
    data: &Dataset,
    params: &DecisionTreeParams,
) -> Result<TrainedModel, ClassifierError> {
    params.train(data)
}

pub fn train_random_forest(
    data: &Dataset,
    params: &RandomForestParams,
) -> Result<TrainedModel, ClassifierError> {
    params.train(data)
}

pub fn train_nbt(data: &Dataset, params: &NbtParams) -> Result<TrainedModel, ClassifierError> {
    params.train(data)
}
