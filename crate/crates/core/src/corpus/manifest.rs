use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::CorpusError;
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub app_id: String,
    pub path: PathBuf,
    pub label: Label,
}

/// `(app_id, path, label)` rows with unique ids and per-class counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    entries: Vec<ManifestEntry>,
    n_benign: usize,
    n_malware: usize,
}

impl CorpusManifest {
    /// Builds a manifest, rejecting duplicate ids. Line numbers in errors
    /// assume a header on line 1.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert(e.app_id.as_str()) {
                return Err(CorpusError::DuplicateAppId {
                    line: i as u64 + 2,
                    app_id: e.app_id.clone(),
                });
            }
        }
        let n_malware = entries.iter().filter(|e| e.label == Label::Malware).count();
        Ok(Self {
            n_benign: entries.len() - n_malware,
            n_malware,
            entries,
        })
    }

    /// Reads a `app_id,path,label` CSV. Relative paths resolve against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(file, base)
    }

    pub fn parse<R: Read>(reader: R, base_dir: &Path) -> Result<Self, CorpusError> {
        let csv_err = |e: csv::Error| CorpusError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        };
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = r.headers().map_err(csv_err)?;
        if header.iter().collect::<Vec<_>>() != ["app_id", "path", "label"] {
            return Err(CorpusError::Parse {
                line: 1,
                message: "expected header app_id,path,label".to_string(),
            });
        }

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let (app_id, path, label) = (&rec[0], &rec[1], &rec[2]);
            if app_id.is_empty() || path.is_empty() {
                return Err(CorpusError::Parse {
                    line,
                    message: "empty app_id or path".to_string(),
                });
            }
            if !seen.insert(app_id.to_string()) {
                return Err(CorpusError::DuplicateAppId {
                    line,
                    app_id: app_id.to_string(),
                });
            }
            let label = label
                .parse::<Label>()
                .map_err(|_| CorpusError::UnknownLabel {
                    line,
                    label: label.to_string(),
                })?;
            entries.push(ManifestEntry {
                app_id: app_id.to_string(),
                path: base_dir.join(path),
                label,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_benign(&self) -> usize {
        self.n_benign
    }

    pub fn n_malware(&self) -> usize {
        self.n_malware
    }

    /// SHA-256 over the entries as resolved (id, path, label).
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.app_id.as_bytes());
            h.update([0]);
            h.update(e.path.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(e.label.as_str().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
