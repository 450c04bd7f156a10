use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::histogram::{self, OpcodeHistogram};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledHistogram {
    pub histogram: OpcodeHistogram,
    pub label: Label,
}

/// Where a histogram set came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_checksum: String,
    pub extraction_config: String,
}

/// Labeled histograms in a fixed order; the unit every later stage consumes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledHistogramSet {
    rows: Vec<LabeledHistogram>,
    pub provenance: Provenance,
}

impl LabeledHistogramSet {
    pub fn new(rows: Vec<LabeledHistogram>, provenance: Provenance) -> Self {
        Self { rows, provenance }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (OpcodeHistogram, Label)>) -> Self {
        Self::new(
            pairs
                .into_iter()
                .map(|(histogram, label)| LabeledHistogram { histogram, label })
                .collect(),
            Provenance::default(),
        )
    }

    pub fn rows(&self) -> &[LabeledHistogram] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        histogram::write_records(
            writer,
            self.rows.iter().map(|r| (&r.histogram, Some(r.label))),
        )?;
        Ok(())
    }

    /// Reads histogram records; every row must carry a label.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let rows = histogram::read_records(reader)?
            .into_iter()
            .map(|(histogram, label)| match label {
                Some(label) => Ok(LabeledHistogram { histogram, label }),
                None => Err(CorpusError::Unlabeled(histogram.app_id)),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::new(rows, Provenance::default()))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let file = File::create(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(BufWriter::new(file))
    }
}
