//! Evaluation protocols: confusion matrices and rates, stratified k-fold
//! cross-validation, held-out testing and the feature-count sweep.

use crate::classifiers::ClassifierError;
use crate::corpus::CorpusError;
use crate::label::Label;
use crate::selection::SelectionError;

mod crossval;
mod metrics;
mod report;
mod sweep;
mod synthetic;

pub use crossval::{
    cross_validate, holdout, split_set, stratified_folds, CrossValidation, FoldResult,
    HoldoutResult, RankingConfig,
};
pub use metrics::{confusion, metrics, ConfusionMatrix, MetricSet};
pub use report::{write_folds_csv, write_holdout_csv, write_sweep_csv, FOLD_HEADER, SWEEP_HEADER};
pub use sweep::{
    feature_sweep, ClassifierSummary, Grid, SweepCell, SweepConfig, SweepReport, SweepRow,
    SweepSummary,
};
pub use synthetic::{generate_synthetic_corpus, SyntheticCorpus, PLANTED_PER_CLASS};

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{k}-fold cross-validation needs at least {k} {label} instances, found {found}")]
    TooFewInstances {
        label: Label,
        found: usize,
        k: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}
