//! CSV renderings of evaluation results.
//!
//! Undefined rates are written as `NaN`. Floats use the shortest
//! representation that round-trips, so identical runs give identical bytes.

use std::io::Write;

use super::crossval::{CrossValidation, HoldoutResult};
use super::metrics::{ConfusionMatrix, MetricSet};
use super::sweep::SweepReport;
use super::EvaluationError;

pub const SWEEP_HEADER: [&str; 14] = [
    "classifier",
    "n_features",
    "seed",
    "TP",
    "FN",
    "TN",
    "FP",
    "accuracy_pct",
    "TPR",
    "TNR",
    "FPR",
    "FNR",
    "wall_ms",
    "status",
];

pub const FOLD_HEADER: [&str; 12] = [
    "fold",
    "n_train",
    "n_test",
    "TP",
    "FN",
    "TN",
    "FP",
    "accuracy_pct",
    "TPR",
    "TNR",
    "FPR",
    "FNR",
];

fn rate(r: Option<f64>) -> String {
    r.map_or_else(|| "NaN".to_string(), |v| v.to_string())
}

fn cells(cm: &ConfusionMatrix, m: &MetricSet) -> [String; 9] {
    [
        cm.tp.to_string(),
        cm.fn_.to_string(),
        cm.tn.to_string(),
        cm.fp.to_string(),
        m.accuracy_pct.to_string(),
        rate(m.tpr),
        rate(m.tnr),
        rate(m.fpr),
        rate(m.fnr),
    ]
}

/// One row per sweep cell. `wall_ms` is left blank unless `timing` is set,
/// which keeps reruns byte-identical.
pub fn write_sweep_csv<W: Write>(
    writer: W,
    report: &SweepReport,
    timing: bool,
) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for row in &report.rows {
        let mut rec = vec![
            row.classifier.to_string(),
            row.n_features.to_string(),
            row.seed.to_string(),
        ];
        match &row.outcome {
            Ok(cell) => rec.extend(cells(&cell.confusion, &cell.metrics)),
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), 9)),
        }
        rec.push(if timing {
            format!("{:.3}", row.wall_ms)
        } else {
            String::new()
        });
        rec.push(match &row.outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        });
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per-fold rows followed by an `aggregate` row over the summed matrix.
pub fn write_folds_csv<W: Write>(writer: W, cv: &CrossValidation) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FOLD_HEADER)?;
    for f in &cv.folds {
        let mut rec = vec![
            f.fold.to_string(),
            f.n_train.to_string(),
            f.n_test.to_string(),
        ];
        rec.extend(cells(&f.confusion, &f.metrics));
        w.write_record(&rec)?;
    }
    let n: usize = cv.folds.iter().map(|f| f.n_test).sum();
    let mut rec = vec!["aggregate".to_string(), String::new(), n.to_string()];
    rec.extend(cells(&cv.confusion, &cv.metrics));
    w.write_record(&rec)?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// A single `holdout` row in the fold schema.
pub fn write_holdout_csv<W: Write>(
    writer: W,
    result: &HoldoutResult,
) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FOLD_HEADER)?;
    let mut rec = vec![
        "holdout".to_string(),
        result.split.train.len().to_string(),
        result.split.test.len().to_string(),
    ];
    rec.extend(cells(&result.confusion, &result.metrics));
    w.write_record(&rec)?;
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
