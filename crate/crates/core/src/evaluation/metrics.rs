use std::fmt;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::classifiers::{ClassifierError, Dataset, TrainedModel};
use crate::label::Label;

/// Malware is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        Self { tp, fn_, tn, fp }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Malware, Label::Malware) => self.tp += 1,
            (Label::Malware, Label::Benign) => self.fn_ += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
            (Label::Benign, Label::Malware) => self.fp += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut cm = Self::default();
        for (truth, predicted) in pairs {
            cm.record(truth, predicted);
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.tn + self.fp
    }

    pub fn malware(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn benign(&self) -> u64 {
        self.tn + self.fp
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fn_ += rhs.fn_;
        self.tn += rhs.tn;
        self.fp += rhs.fp;
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TP={} FN={} TN={} FP={}",
            self.tp, self.fn_, self.tn, self.fp
        )
    }
}

/// Rates whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy_pct: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet, EvaluationError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvaluationError::EmptyMatrix);
    }
    Ok(MetricSet {
        accuracy_pct: (cm.tp + cm.tn) as f64 / total as f64 * 100.0,
        tpr: ratio(cm.tp, cm.malware()),
        tnr: ratio(cm.tn, cm.benign()),
        fpr: ratio(cm.fp, cm.benign()),
        fnr: ratio(cm.fn_, cm.malware()),
    })
}

/// Scores every row of `test` with `model`.
pub fn confusion(model: &TrainedModel, test: &Dataset) -> Result<ConfusionMatrix, ClassifierError> {
    let mut cm = ConfusionMatrix::default();
    for (x, &truth) in test.vectors().iter().zip(test.labels()) {
        cm.record(truth, model.predict(x)?.label);
    }
    Ok(cm)
}
