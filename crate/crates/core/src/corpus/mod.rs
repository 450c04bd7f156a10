//! Labeled corpora: manifests, the on-disk histogram cache and train/test splits.

use std::io;
use std::path::PathBuf;

use crate::extraction::ExtractError;
use crate::histogram::RecordError;
use crate::label::Label;

mod cache;
mod manifest;
mod set;
mod split;

pub use cache::{
    build_histogram_set, source_checksum, BuildOptions, BuildReport, FailurePolicy, HistogramCache,
    SkippedEntry, CACHE_INDEX_FILE, HISTOGRAMS_FILE,
};
pub use manifest::{CorpusManifest, ManifestEntry};
pub use set::{LabeledHistogram, LabeledHistogramSet, Provenance};
pub use split::{random_split, split_labels, stratified_split, Split};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate app_id {app_id:?}")]
    DuplicateAppId { line: u64, app_id: String },
    #[error("line {line}: unknown label {label:?} (expected benign or malware)")]
    UnknownLabel { line: u64, label: String },
    #[error("{app_id}: {source}")]
    Extract {
        app_id: String,
        source: ExtractError,
    },
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("histogram {0:?} has no label")]
    Unlabeled(String),
    #[error("no {0} instances")]
    MissingClass(Label),
    #[error("test fraction would leave no {0} instances for training")]
    DegenerateClass(Label),
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
}
