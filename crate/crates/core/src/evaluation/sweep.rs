use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossval::split_set;
use super::metrics::{confusion, metrics, ConfusionMatrix, MetricSet};
use super::EvaluationError;
use crate::classifiers::{ClassifierConfig, ClassifierKind, Trainer};
use crate::corpus::{LabeledHistogramSet, Split};
use crate::opcodes::OPCODE_COUNT;
use crate::selection::{class_means_of, project_set, rank_features, NormalizationMode};

/// Inclusive arithmetic grid of feature counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub start: usize,
    pub stop: usize,
    pub step: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            start: 20,
            stop: 200,
            step: 20,
        }
    }
}

impl Grid {
    pub fn new(start: usize, stop: usize, step: usize) -> Result<Self, EvaluationError> {
        if start == 0 || step == 0 || start > stop {
            return Err(EvaluationError::InvalidParam(format!(
                "grid {start}..={stop} step {step} is empty"
            )));
        }
        Ok(Self { start, stop, step })
    }

    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.stop).step_by(self.step.max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub classifiers: Vec<ClassifierConfig>,
    pub grid: Grid,
    pub test_fraction: f64,
    pub seed: u64,
    pub mode: NormalizationMode,
    pub paper_faithful: bool,
    /// Keep class proportions in the held-out split.
    pub stratified: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            classifiers: ClassifierKind::ALL
                .iter()
                .map(|&k| ClassifierConfig::default_for(k))
                .collect(),
            grid: Grid::default(),
            test_fraction: 0.2,
            seed: 0,
            mode: NormalizationMode::default(),
            paper_faithful: false,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub classifier: ClassifierKind,
    pub n_features: usize,
    pub seed: u64,
    /// The error message of a failed cell.
    pub outcome: Result<SweepCell, String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSummary {
    pub classifier: ClassifierKind,
    pub cells: usize,
    pub best_accuracy_pct: f64,
    /// Smallest n reaching the best accuracy.
    pub best_n: usize,
    pub mean_accuracy_pct: f64,
    /// Population standard deviation of accuracy across the grid.
    pub std_accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub per_classifier: Vec<ClassifierSummary>,
    /// Classifier with the smallest accuracy standard deviation.
    pub least_fluctuation: Option<ClassifierKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub grid: Grid,
    pub split: Split,
    /// Sorted by classifier, then n.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn summary(&self) -> SweepSummary {
        let mut accs: BTreeMap<ClassifierKind, Vec<(usize, f64)>> = BTreeMap::new();
        for row in &self.rows {
            if let Ok(cell) = &row.outcome {
                accs.entry(row.classifier)
                    .or_default()
                    .push((row.n_features, cell.metrics.accuracy_pct));
            }
        }
        let per_classifier: Vec<ClassifierSummary> = accs
            .into_iter()
            .map(|(classifier, points)| {
                let n = points.len() as f64;
                let mean = points.iter().map(|p| p.1).sum::<f64>() / n;
                let var = points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
                let (best_n, best) =
                    points
                        .iter()
                        .copied()
                        .fold(
                            (0, f64::NEG_INFINITY),
                            |acc, p| if p.1 > acc.1 { p } else { acc },
                        );
                ClassifierSummary {
                    classifier,
                    cells: points.len(),
                    best_accuracy_pct: best,
                    best_n,
                    mean_accuracy_pct: mean,
                    std_accuracy_pct: var.sqrt(),
                }
            })
            .collect();
        let least_fluctuation = per_classifier
            .iter()
            .min_by(|a, b| a.std_accuracy_pct.total_cmp(&b.std_accuracy_pct))
            .map(|s| s.classifier);
        SweepSummary {
            per_classifier,
            least_fluctuation,
        }
    }
}

/// Runs every (classifier, n) cell on one held-out split.
///
/// The ranking is computed once from the training rows (or the whole set
/// when `paper_faithful`) and truncated per n. Cells run in parallel; a
/// failing cell is recorded and the rest continue.
pub fn feature_sweep(
    set: &LabeledHistogramSet,
    config: &SweepConfig,
) -> Result<SweepReport, EvaluationError> {
    if config.classifiers.is_empty() {
        return Err(EvaluationError::InvalidParam(
            "no classifiers to sweep".into(),
        ));
    }
    let mut kinds: Vec<ClassifierKind> = config.classifiers.iter().map(|c| c.kind()).collect();
    kinds.sort();
    if kinds.windows(2).any(|w| w[0] == w[1]) {
        return Err(EvaluationError::InvalidParam(
            "each classifier may appear once".into(),
        ));
    }
    let grid = Grid::new(config.grid.start, config.grid.stop, config.grid.step)?;

    let split = split_set(set, config.test_fraction, config.seed, config.stratified)?;
    let rank_rows: Vec<usize> = if config.paper_faithful {
        (0..set.len()).collect()
    } else {
        split.train.clone()
    };
    let full = rank_features(&class_means_of(set, &rank_rows, config.mode)?, OPCODE_COUNT)?;

    let cells: Vec<(&ClassifierConfig, usize)> = config
        .classifiers
        .iter()
        .flat_map(|c| grid.values().into_iter().map(move |n| (c, n)))
        .collect();

    let mut rows: Vec<SweepRow> = cells
        .into_par_iter()
        .map(|(classifier, n)| {
            let started = Instant::now();
            let outcome = (|| -> Result<SweepCell, EvaluationError> {
                let features = full.top(n);
                let train = project_set(set, &features, Some(&split.train))?;
                let test = project_set(set, &features, Some(&split.test))?;
                let model = classifier.train(&train)?;
                let cm = confusion(&model, &test)?;
                Ok(SweepCell {
                    confusion: cm,
                    metrics: metrics(&cm)?,
                })
            })();
            if let Err(e) = &outcome {
                log::warn!("sweep cell {} n={n} failed: {e}", classifier.kind());
            }
            SweepRow {
                classifier: classifier.kind(),
                n_features: n,
                seed: config.seed,
                outcome: outcome.map_err(|e| e.to_string()),
                wall_ms: started.elapsed().as_secs_f64() * 1000.0,
            }
        })
        .collect();
    rows.sort_by_key(|r| (r.classifier, r.n_features));

    Ok(SweepReport { grid, split, rows })
}
