//! Static detection of Android malware from Dalvik opcode occurrence counts.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`extraction`] turns an APK, DEX file or smali dump into an
//!    [`OpcodeHistogram`].
//! 2. [`corpus`] pairs histograms with labels, caches them and splits them.
//! 3. [`selection`] ranks opcodes by the absolute difference of their
//!    benign and malware class means and projects histograms onto the top n.
//! 4. [`classifiers`] trains decision trees, random forests and naive-Bayes
//!    trees, and [`evaluation`] scores them with held-out or k-fold protocols.

pub mod classifiers;
pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod histogram;
pub mod label;
pub mod opcodes;
pub mod selection;

pub use classifiers::{Dataset, TrainedModel};
pub use corpus::{CorpusManifest, LabeledHistogramSet};
pub use histogram::OpcodeHistogram;
pub use label::Label;
pub use opcodes::InstructionFormatTable;
pub use selection::{ClassMeanProfile, FeatureRanking, NormalizationMode};
