//! Persistent histogram cache keyed by source checksum.
//!
//! A cache directory holds `histograms.csv` (histogram records) and
//! `cache_index.csv` (`app_id,source_checksum,config_hash`). An entry is reused
//! only when both the source checksum and the extraction config hash match.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::{CorpusError, CorpusManifest, LabeledHistogram, LabeledHistogramSet, Provenance};
use crate::extraction::{self, Diagnostics, ExtractError};
use crate::histogram::{self, OpcodeHistogram};
use crate::label::Label;
use crate::opcodes::{InstructionFormatTable, OPCODE_COUNT};

pub const HISTOGRAMS_FILE: &str = "histograms.csv";
pub const CACHE_INDEX_FILE: &str = "cache_index.csv";

const EXTRACTOR_VERSION: &str = "droidops-extract/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FailurePolicy {
    #[default]
    Abort,
    Skip,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions<'a> {
    pub policy: FailurePolicy,
    pub table: &'a InstructionFormatTable,
}

impl Default for BuildOptions<'_> {
    fn default() -> Self {
        Self {
            policy: FailurePolicy::Abort,
            table: InstructionFormatTable::shared(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedEntry {
    pub app_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub extracted: usize,
    pub cached: usize,
    pub skipped: Vec<SkippedEntry>,
    /// Diagnostics of the apps extracted in this run.
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CacheEntry {
    checksum: String,
    config_hash: String,
    histogram: OpcodeHistogram,
    label: Option<Label>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    app_id: String,
    source_checksum: String,
    config_hash: String,
}

/// In-memory view of a cache directory; entries keep their file order.
#[derive(Debug, Default)]
pub struct HistogramCache {
    dir: PathBuf,
    order: Vec<String>,
    entries: HashMap<String, CacheEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl HistogramCache {
    /// Opens `dir`; missing files mean an empty cache.
    pub fn open(dir: &Path) -> Result<Self, CorpusError> {
        let mut cache = Self {
            dir: dir.to_path_buf(),
            ..Self::default()
        };
        let hist_path = dir.join(HISTOGRAMS_FILE);
        let index_path = dir.join(CACHE_INDEX_FILE);
        if !hist_path.exists() || !index_path.exists() {
            return Ok(cache);
        }

        let mut index: HashMap<String, IndexRow> = HashMap::new();
        let file = File::open(&index_path).map_err(io_err(&index_path))?;
        for row in csv::Reader::from_reader(BufReader::new(file)).deserialize::<IndexRow>() {
            let row = row.map_err(|e| CorpusError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: format!("{}: {e}", index_path.display()),
            })?;
            index.insert(row.app_id.clone(), row);
        }

        let file = File::open(&hist_path).map_err(io_err(&hist_path))?;
        for (histogram, label) in histogram::read_records(BufReader::new(file))? {
            let Some(row) = index.remove(&histogram.app_id) else {
                continue;
            };
            cache.order.push(histogram.app_id.clone());
            cache.entries.insert(
                histogram.app_id.clone(),
                CacheEntry {
                    checksum: row.source_checksum,
                    config_hash: row.config_hash,
                    histogram,
                    label,
                },
            );
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn lookup(
        &self,
        app_id: &str,
        checksum: Option<&str>,
        config_hash: &str,
    ) -> Option<&CacheEntry> {
        self.entries
            .get(app_id)
            .filter(|e| e.config_hash == config_hash && checksum.is_none_or(|c| c == e.checksum))
    }

    fn upsert(&mut self, app_id: &str, entry: CacheEntry) {
        if self.entries.insert(app_id.to_string(), entry).is_none() {
            self.order.push(app_id.to_string());
        }
    }

    /// Rewrites both files through temporary siblings.
    pub fn save(&self) -> Result<(), CorpusError> {
        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;

        let hist_path = self.dir.join(HISTOGRAMS_FILE);
        write_atomically(&hist_path, |w| {
            histogram::write_records(
                w,
                self.order.iter().map(|id| {
                    let e = &self.entries[id];
                    (&e.histogram, e.label)
                }),
            )
            .map_err(CorpusError::from)
        })?;

        let index_path = self.dir.join(CACHE_INDEX_FILE);
        write_atomically(&index_path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            for id in &self.order {
                let e = &self.entries[id];
                csv.serialize(IndexRow {
                    app_id: id.clone(),
                    source_checksum: e.checksum.clone(),
                    config_hash: e.config_hash.clone(),
                })
                .map_err(histogram::RecordError::from)?;
            }
            csv.flush().map_err(io_err(&index_path))?;
            Ok(())
        })
    }
}

fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CorpusError>,
) -> Result<(), CorpusError> {
    let tmp = path.with_extension("csv.tmp");
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// SHA-256 of a file, or of every file under a directory (relative paths
/// and contents, in name order).
pub fn source_checksum(path: &Path) -> Result<String, ExtractError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| ExtractError::Io { path: p, source }
    };
    let mut hasher = Sha256::new();
    let meta = fs::metadata(path).map_err(io(path))?;
    if meta.is_dir() {
        for entry in WalkDir::new(path).sort_by_file_name() {
            let entry = entry.map_err(|e| ExtractError::Io {
                path: path.to_path_buf(),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(path).unwrap_or(entry.path());
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0]);
            let bytes = fs::read(entry.path()).map_err(io(entry.path()))?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    } else {
        let mut file = File::open(path).map_err(io(path))?;
        let mut buf = [0u8; 64 * 1024];
        loop {
            let n = file.read(&mut buf).map_err(io(path))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Fingerprint of the extractor version and opcode table.
pub fn extraction_config_hash(table: &InstructionFormatTable) -> String {
    let mut h = Sha256::new();
    h.update(EXTRACTOR_VERSION.as_bytes());
    for op in 0..OPCODE_COUNT as u16 {
        let op = op as u8;
        h.update([table.width(op) as u8, table.is_defined(op) as u8]);
        h.update(table.mnemonic(op).as_bytes());
        h.update([0]);
    }
    hex::encode(&h.finalize()[..8])
}

/// Builds the labeled set for `manifest`, reusing cached histograms whose
/// source checksum is unchanged and extracting (in parallel) the rest.
///
/// The cache is rewritten once at the end; on an aborted build it is left
/// untouched.
pub fn build_histogram_set(
    manifest: &CorpusManifest,
    cache_dir: &Path,
    options: BuildOptions<'_>,
) -> Result<(LabeledHistogramSet, BuildReport), CorpusError> {
    let mut cache = HistogramCache::open(cache_dir)?;
    let config_hash = extraction_config_hash(options.table);

    enum Outcome {
        Cached(OpcodeHistogram),
        Extracted(String, extraction::Extraction),
        Failed(ExtractError),
    }

    let outcomes: Vec<Outcome> = manifest
        .entries()
        .par_iter()
        .map(|entry| {
            let checksum = match source_checksum(&entry.path) {
                Ok(c) => c,
                // unreadable source: fall back to whatever the cache holds
                Err(e) => {
                    return match cache.lookup(&entry.app_id, None, &config_hash) {
                        Some(hit) => Outcome::Cached(hit.histogram.clone()),
                        None => Outcome::Failed(e),
                    };
                }
            };
            if let Some(hit) = cache.lookup(&entry.app_id, Some(&checksum), &config_hash) {
                return Outcome::Cached(hit.histogram.clone());
            }
            match extraction::extract_path(&entry.path, &entry.app_id, options.table) {
                Ok(ex) => Outcome::Extracted(checksum, ex),
                Err(e) => Outcome::Failed(e),
            }
        })
        .collect();

    let mut report = BuildReport::default();
    let mut rows = Vec::with_capacity(manifest.len());
    for (entry, outcome) in manifest.entries().iter().zip(outcomes) {
        let histogram = match outcome {
            Outcome::Cached(h) => {
                report.cached += 1;
                h
            }
            Outcome::Extracted(checksum, ex) => {
                report.extracted += 1;
                report.diagnostics.merge(&ex.diagnostics);
                cache.upsert(
                    &entry.app_id,
                    CacheEntry {
                        checksum,
                        config_hash: config_hash.clone(),
                        histogram: ex.histogram.clone(),
                        label: Some(entry.label),
                    },
                );
                ex.histogram
            }
            Outcome::Failed(source) => match options.policy {
                FailurePolicy::Abort => {
                    return Err(CorpusError::Extract {
                        app_id: entry.app_id.clone(),
                        source,
                    })
                }
                FailurePolicy::Skip => {
                    log::warn!("skipping {}: {source}", entry.app_id);
                    report.skipped.push(SkippedEntry {
                        app_id: entry.app_id.clone(),
                        error: source.to_string(),
                    });
                    continue;
                }
            },
        };
        // labels follow the manifest even for cache hits
        if let Some(e) = cache.entries.get_mut(&entry.app_id) {
            e.label = Some(entry.label);
        }
        rows.push(LabeledHistogram {
            histogram,
            label: entry.label,
        });
    }
    cache.save()?;

    let provenance = Provenance {
        manifest_checksum: manifest.checksum(),
        extraction_config: config_hash,
    };
    Ok((LabeledHistogramSet::new(rows, provenance), report))
}
