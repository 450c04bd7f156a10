//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use droidops::evaluation::generate_synthetic_corpus;
use droidops::selection::{compute_class_means, project_set, rank_features};
use droidops::{Dataset, LabeledHistogramSet, NormalizationMode};

pub fn fixture_dex(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/dex")
        .join(format!("{name}.dex"))
}

pub fn corpus(per_class: usize) -> LabeledHistogramSet {
    generate_synthetic_corpus(per_class, per_class, 0.7, 42)
        .expect("valid generator parameters")
        .set
}

/// The corpus projected onto its top `n` opcodes.
pub fn projected(per_class: usize, n: usize) -> Dataset {
    let set = corpus(per_class);
    let profile =
        compute_class_means(&set, NormalizationMode::MeanRawCount).expect("both classes present");
    let ranking = rank_features(&profile, n).expect("n is positive");
    project_set(&set, &ranking, None).expect("projection of a valid set")
}
