use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, metrics, ConfusionMatrix, MetricSet};
use super::EvaluationError;
use crate::classifiers::{ClassifierConfig, Trainer};
use crate::corpus::{random_split, stratified_split, LabeledHistogramSet, Split};
use crate::label::Label;
use crate::selection::{
    class_means_of, project_set, rank_features, FeatureRanking, NormalizationMode,
};

/// How features are chosen before training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub n_features: usize,
    pub mode: NormalizationMode,
    /// Rank on the whole set, test rows included, instead of on training
    /// rows only.
    pub paper_faithful: bool,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            n_features: 20,
            mode: NormalizationMode::default(),
            paper_faithful: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Opcodes the fold's model was trained on, in ranking order.
    pub ranking: Vec<u8>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Element-wise sum of the fold matrices.
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutResult {
    pub split: Split,
    pub ranking: FeatureRanking,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

/// Fold index of every row. Each class is shuffled and dealt round-robin,
/// continuing the rotation from where the previous class stopped, so both
/// per-class and overall fold sizes differ by at most one.
pub fn stratified_folds(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, EvaluationError> {
    if k < 2 {
        return Err(EvaluationError::InvalidParam(format!(
            "k must be at least 2, got {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut offset = 0;
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(EvaluationError::TooFewInstances {
                label: class,
                found: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset += members.len();
    }
    Ok(fold_of)
}

fn rank_on(
    set: &LabeledHistogramSet,
    train: &[usize],
    ranking: &RankingConfig,
) -> Result<FeatureRanking, EvaluationError> {
    let profile = if ranking.paper_faithful {
        let all: Vec<usize> = (0..set.len()).collect();
        class_means_of(set, &all, ranking.mode)?
    } else {
        class_means_of(set, train, ranking.mode)?
    };
    Ok(rank_features(&profile, ranking.n_features)?)
}

fn fit_and_score(
    set: &LabeledHistogramSet,
    train: &[usize],
    test: &[usize],
    features: &FeatureRanking,
    classifier: &ClassifierConfig,
) -> Result<ConfusionMatrix, EvaluationError> {
    let train_data = project_set(set, features, Some(train))?;
    let test_data = project_set(set, features, Some(test))?;
    let model = classifier.train(&train_data)?;
    Ok(confusion(&model, &test_data)?)
}

/// Stratified k-fold cross-validation. Aggregate metrics come from the
/// summed confusion matrix.
pub fn cross_validate(
    set: &LabeledHistogramSet,
    classifier: &ClassifierConfig,
    ranking: &RankingConfig,
    k: usize,
    seed: u64,
) -> Result<CrossValidation, EvaluationError> {
    let fold_of = stratified_folds(&set.labels(), k, seed)?;
    let folds = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..set.len()).partition(|&i| fold_of[i] == fold);
            let features = rank_on(set, &train, ranking)?;
            let cm = fit_and_score(set, &train, &test, &features, classifier)?;
            Ok(FoldResult {
                fold,
                n_train: train.len(),
                n_test: test.len(),
                ranking: features.opcodes(),
                confusion: cm,
                metrics: metrics(&cm)?,
            })
        })
        .collect::<Result<Vec<_>, EvaluationError>>()?;

    let mut total = ConfusionMatrix::default();
    for f in &folds {
        total += f.confusion;
    }
    Ok(CrossValidation {
        k,
        seed,
        folds,
        confusion: total,
        metrics: metrics(&total)?,
    })
}

/// Stratified split of `set`, or a plain shuffled one when `stratified` is off.
pub fn split_set(
    set: &LabeledHistogramSet,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<Split, EvaluationError> {
    Ok(if stratified {
        stratified_split(set, test_fraction, seed)?
    } else {
        random_split(set.len(), test_fraction, seed)?
    })
}

/// Trains on one split and scores the held-out part.
pub fn holdout(
    set: &LabeledHistogramSet,
    classifier: &ClassifierConfig,
    ranking: &RankingConfig,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<HoldoutResult, EvaluationError> {
    let split = split_set(set, test_fraction, seed, stratified)?;
    let features = rank_on(set, &split.train, ranking)?;
    let cm = fit_and_score(set, &split.train, &split.test, &features, classifier)?;
    Ok(HoldoutResult {
        split,
        ranking: features,
        confusion: cm,
        metrics: metrics(&cm)?,
    })
}
