//! Prominent-opcode selection by class-mean frequency difference.
//!
//! For every opcode the benign and malware class means are computed, their
//! absolute difference is the opcode's score, and the n highest-scoring
//! opcodes become the feature set.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::Dataset;
use crate::corpus::LabeledHistogramSet;
use crate::histogram::OpcodeHistogram;
use crate::label::Label;
use crate::opcodes::{InstructionFormatTable, OPCODE_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("no {0} instances to compute class means from")]
    EmptyClass(Label),
    #[error("feature count must be at least 1")]
    InvalidCount,
    #[error("ranking must not be empty")]
    EmptyRanking,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("ranking file: {0}")]
    Format(String),
}

/// How per-app counts enter the class means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Summed raw counts divided by the class size.
    #[default]
    #[serde(alias = "raw")]
    MeanRawCount,
    /// Each app's counts are first divided by its total.
    #[serde(alias = "relative")]
    MeanRelativeFrequency,
}

impl NormalizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationMode::MeanRawCount => "raw",
            NormalizationMode::MeanRelativeFrequency => "relative",
        }
    }

    /// Feature value of `opcode` in `h` under this mode.
    #[inline]
    pub fn value(self, h: &OpcodeHistogram, opcode: u8) -> f64 {
        match self {
            NormalizationMode::MeanRawCount => h.count(opcode) as f64,
            NormalizationMode::MeanRelativeFrequency => h.relative(opcode),
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" | "mean_raw_count" => Ok(NormalizationMode::MeanRawCount),
            "relative" | "mean_relative_frequency" => Ok(NormalizationMode::MeanRelativeFrequency),
            _ => Err(format!(
                "unknown normalization mode {s:?} (expected raw or relative)"
            )),
        }
    }
}

/// Per-class mean opcode frequencies and their absolute difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeanProfile {
    pub benign_mean: [f64; OPCODE_COUNT],
    pub malware_mean: [f64; OPCODE_COUNT],
    pub difference: [f64; OPCODE_COUNT],
    pub mode: NormalizationMode,
}

/// Class means over arbitrary `(histogram, label)` rows.
///
/// Raw mode sums integer counts exactly. Relative mode sums each opcode's
/// per-app shares in ascending order, so the result does not depend on row
/// order.
pub fn class_means<'a>(
    rows: impl IntoIterator<Item = (&'a OpcodeHistogram, Label)>,
    mode: NormalizationMode,
) -> Result<ClassMeanProfile, SelectionError> {
    let mut n = [0usize; 2];
    let mut means = [[0f64; OPCODE_COUNT]; 2];

    match mode {
        NormalizationMode::MeanRawCount => {
            let mut sums = [[0u128; OPCODE_COUNT]; 2];
            for (h, label) in rows {
                n[label.index()] += 1;
                for (s, &c) in sums[label.index()].iter_mut().zip(h.counts()) {
                    *s += u128::from(c);
                }
            }
            for class in 0..2 {
                for op in 0..OPCODE_COUNT {
                    means[class][op] = sums[class][op] as f64 / n[class].max(1) as f64;
                }
            }
        }
        NormalizationMode::MeanRelativeFrequency => {
            let mut shares: [Vec<Vec<f64>>; 2] = [
                vec![Vec::new(); OPCODE_COUNT],
                vec![Vec::new(); OPCODE_COUNT],
            ];
            for (h, label) in rows {
                n[label.index()] += 1;
                for (op, column) in shares[label.index()].iter_mut().enumerate() {
                    column.push(h.relative(op as u8));
                }
            }
            for class in 0..2 {
                for op in 0..OPCODE_COUNT {
                    let v = &mut shares[class][op];
                    v.sort_by(f64::total_cmp);
                    means[class][op] = v.iter().sum::<f64>() / n[class].max(1) as f64;
                }
            }
        }
    }

    for label in Label::ALL {
        if n[label.index()] == 0 {
            return Err(SelectionError::EmptyClass(label));
        }
    }
    let [benign_mean, malware_mean] = means;
    let difference = std::array::from_fn(|op| (benign_mean[op] - malware_mean[op]).abs());
    Ok(ClassMeanProfile {
        benign_mean,
        malware_mean,
        difference,
        mode,
    })
}

pub fn compute_class_means(
    set: &LabeledHistogramSet,
    mode: NormalizationMode,
) -> Result<ClassMeanProfile, SelectionError> {
    class_means(set.rows().iter().map(|r| (&r.histogram, r.label)), mode)
}

/// Class means over the rows at `indices` only.
pub fn class_means_of(
    set: &LabeledHistogramSet,
    indices: &[usize],
    mode: NormalizationMode,
) -> Result<ClassMeanProfile, SelectionError> {
    let rows = set.rows();
    class_means(
        indices.iter().map(|&i| (&rows[i].histogram, rows[i].label)),
        mode,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedOpcode {
    pub opcode: u8,
    pub score: f64,
}

/// Opcodes ordered by descending score, ties by ascending opcode byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub ranked: Vec<RankedOpcode>,
    /// The count that was asked for; may exceed `ranked.len()`.
    pub requested: usize,
    pub mode: NormalizationMode,
}

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn opcodes(&self) -> Vec<u8> {
        self.ranked.iter().map(|r| r.opcode).collect()
    }

    /// The first `n` entries (all of them if `n` is larger).
    pub fn top(&self, n: usize) -> FeatureRanking {
        FeatureRanking {
            ranked: self.ranked.iter().take(n).copied().collect(),
            requested: n,
            mode: self.mode,
        }
    }

    /// Feature names in ranking order, `op_XX`.
    pub fn feature_names(&self) -> Vec<String> {
        self.ranked
            .iter()
            .map(|r| format!("op_{:02x}", r.opcode))
            .collect()
    }
}

pub fn rank_features(
    profile: &ClassMeanProfile,
    n: usize,
) -> Result<FeatureRanking, SelectionError> {
    if n == 0 {
        return Err(SelectionError::InvalidCount);
    }
    let mut ranked: Vec<RankedOpcode> = (0..OPCODE_COUNT)
        .map(|op| RankedOpcode {
            opcode: op as u8,
            score: profile.difference[op],
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.opcode.cmp(&b.opcode)));
    ranked.truncate(n);
    Ok(FeatureRanking {
        ranked,
        requested: n,
        mode: profile.mode,
    })
}

/// Feature vector of `h` in ranking order, using the ranking's mode.
pub fn project(h: &OpcodeHistogram, ranking: &FeatureRanking) -> Vec<f64> {
    ranking
        .ranked
        .iter()
        .map(|r| ranking.mode.value(h, r.opcode))
        .collect()
}

/// Projects the rows at `indices` (all rows if `None`) into a dataset.
pub fn project_set(
    set: &LabeledHistogramSet,
    ranking: &FeatureRanking,
    indices: Option<&[usize]>,
) -> Result<Dataset, SelectionError> {
    if ranking.is_empty() {
        return Err(SelectionError::EmptyRanking);
    }
    let rows = set.rows();
    let pick: Box<dyn Iterator<Item = usize>> = match indices {
        Some(idx) => Box::new(idx.iter().copied()),
        None => Box::new(0..rows.len()),
    };
    let (vectors, labels) = pick
        .map(|i| (project(&rows[i].histogram, ranking), rows[i].label))
        .unzip();
    Ok(Dataset::new(vectors, labels, ranking.feature_names())
        .expect("projected vectors share the ranking's length"))
}

/// Writes `rank,opcode_hex,mnemonic,F_B,F_M,D` rows after a `# mode=...` line.
pub fn write_ranking_csv<W: Write>(
    mut writer: W,
    ranking: &FeatureRanking,
    profile: &ClassMeanProfile,
    table: &InstructionFormatTable,
) -> Result<(), SelectionError> {
    writeln!(writer, "# mode={} n={}", ranking.mode, ranking.requested)
        .map_err(csv::Error::from)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "opcode_hex", "mnemonic", "F_B", "F_M", "D"])?;
    for (i, r) in ranking.ranked.iter().enumerate() {
        let op = r.opcode as usize;
        w.write_record([
            (i + 1).to_string(),
            format!("0x{:02x}", r.opcode),
            table.mnemonic(r.opcode).to_string(),
            profile.benign_mean[op].to_string(),
            profile.malware_mean[op].to_string(),
            r.score.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a ranking written by [`write_ranking_csv`]. The mode comes from the
/// `# mode=` comment; other comment lines are ignored.
pub fn read_ranking_csv<R: BufRead>(reader: R) -> Result<FeatureRanking, SelectionError> {
    let mut mode = None;
    let mut body = String::new();
    for line in reader.lines() {
        let line = line.map_err(csv::Error::from)?;
        if let Some(comment) = line.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                if let Some(m) = kv.strip_prefix("mode=") {
                    mode = Some(m.parse().map_err(SelectionError::Format)?);
                }
            }
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mode = mode.ok_or_else(|| SelectionError::Format("missing `# mode=` line".into()))?;

    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut ranked = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad =
            |what: &str| SelectionError::Format(format!("bad {what} in {:?}", rec.as_slice()));
        let hex = rec.get(1).ok_or_else(|| bad("row"))?;
        let opcode =
            u8::from_str_radix(hex.trim_start_matches("0x"), 16).map_err(|_| bad("opcode"))?;
        let score = rec
            .get(5)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("score"))?;
        ranked.push(RankedOpcode { opcode, score });
    }
    if ranked.is_empty() {
        return Err(SelectionError::EmptyRanking);
    }
    Ok(FeatureRanking {
        requested: ranked.len(),
        ranked,
        mode,
    })
}
