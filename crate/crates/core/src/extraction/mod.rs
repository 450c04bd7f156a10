//! Opcode histogram extraction from APKs, raw DEX files and smali dumps.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::histogram::OpcodeHistogram;
use crate::opcodes::InstructionFormatTable;

pub mod apk;
pub mod dex;
pub mod smali;

pub use apk::extract_from_apk;
pub use dex::extract_from_dex;
pub use smali::extract_from_smali;

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: not an APK, DEX file or smali directory", .0.display())]
    UnrecognizedArtifact(PathBuf),
    #[error("malformed DEX at offset {offset:#x}: {reason}")]
    MalformedDex { offset: usize, reason: String },
    #[error("{}: no .smali files", .0.display())]
    NoSmaliFiles(PathBuf),
    #[error("{}: no classes*.dex entries", .0.display())]
    NoDexEntries(PathBuf),
    #[error("{}: {source}", path.display())]
    Zip {
        path: PathBuf,
        source: zip::result::ZipError,
    },
    #[error("{entry}: {source}")]
    InEntry {
        entry: String,
        source: Box<ExtractError>,
    },
}

impl ExtractError {
    /// True if this error (or the one it wraps) is a [`ExtractError::MalformedDex`].
    pub fn is_malformed_dex(&self) -> bool {
        match self {
            ExtractError::MalformedDex { .. } => true,
            ExtractError::InEntry { source, .. } => source.is_malformed_dex(),
            _ => false,
        }
    }
}

/// Non-fatal findings collected while extracting one app.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Methods walked (DEX path only).
    pub methods: u64,
    /// Switch and array payload tables skipped (DEX path only).
    pub payloads: u64,
    /// Undefined opcode slots that were counted anyway.
    pub unknown_opcodes: BTreeMap<u8, u64>,
    /// Leading smali tokens that are not mnemonics.
    pub unmatched_tokens: BTreeMap<String, u64>,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.methods += other.methods;
        self.payloads += other.payloads;
        for (&op, &n) in &other.unknown_opcodes {
            *self.unknown_opcodes.entry(op).or_default() += n;
        }
        for (tok, &n) in &other.unmatched_tokens {
            *self.unmatched_tokens.entry(tok.clone()).or_default() += n;
        }
    }

    pub fn unknown_opcode_total(&self) -> u64 {
        self.unknown_opcodes.values().sum()
    }

    pub fn unmatched_token_total(&self) -> u64 {
        self.unmatched_tokens.values().sum()
    }
}

/// A histogram together with the diagnostics gathered while building it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub histogram: OpcodeHistogram,
    pub diagnostics: Diagnostics,
}

impl Default for Extraction {
    fn default() -> Self {
        Self {
            histogram: OpcodeHistogram::new(""),
            diagnostics: Diagnostics::default(),
        }
    }
}

impl Extraction {
    pub fn merge(&mut self, other: &Extraction) {
        self.histogram += &other.histogram;
        self.diagnostics.merge(&other.diagnostics);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArtifactKind {
    ApkContainer,
    DexFile,
    SmaliDir,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppArtifact {
    pub id: String,
    pub kind: ArtifactKind,
    pub source: PathBuf,
}

/// Resolves the artifact kind of `source` by sniffing its contents.
///
/// The id defaults to the path as given.
pub fn detect_artifact_kind(source: &Path) -> Result<AppArtifact, ExtractError> {
    let io_err = |source_err| ExtractError::Io {
        path: source.to_path_buf(),
        source: source_err,
    };
    let meta = fs::metadata(source).map_err(io_err)?;
    let kind = if meta.is_dir() {
        if smali::smali_files(source)?.is_empty() {
            return Err(ExtractError::UnrecognizedArtifact(source.to_path_buf()));
        }
        ArtifactKind::SmaliDir
    } else {
        let mut magic = Vec::with_capacity(8);
        File::open(source)
            .map_err(io_err)?
            .take(8)
            .read_to_end(&mut magic)
            .map_err(io_err)?;
        if magic.starts_with(b"PK\x03\x04") {
            let file = File::open(source).map_err(io_err)?;
            let archive =
                zip::ZipArchive::new(BufReader::new(file)).map_err(|e| ExtractError::Zip {
                    path: source.to_path_buf(),
                    source: e,
                })?;
            if apk::dex_entries(&archive).is_empty() {
                return Err(ExtractError::NoDexEntries(source.to_path_buf()));
            }
            ArtifactKind::ApkContainer
        } else if dex::dex_magic_version(&magic).is_some() {
            ArtifactKind::DexFile
        } else {
            return Err(ExtractError::UnrecognizedArtifact(source.to_path_buf()));
        }
    };
    Ok(AppArtifact {
        id: source.to_string_lossy().into_owned(),
        kind,
        source: source.to_path_buf(),
    })
}

/// Extracts an artifact of any kind; the histogram carries `artifact.id`.
pub fn extract_artifact(
    artifact: &AppArtifact,
    table: &InstructionFormatTable,
) -> Result<Extraction, ExtractError> {
    let mut extraction = match artifact.kind {
        ArtifactKind::ApkContainer => extract_from_apk(&artifact.source, table)?,
        ArtifactKind::DexFile => {
            let bytes = fs::read(&artifact.source).map_err(|source| ExtractError::Io {
                path: artifact.source.clone(),
                source,
            })?;
            extract_from_dex(&bytes, table)?
        }
        ArtifactKind::SmaliDir => extract_from_smali(&artifact.source, table)?,
    };
    extraction.histogram.app_id = artifact.id.clone();
    Ok(extraction)
}

/// Detects and extracts `source`, naming the histogram `app_id`.
pub fn extract_path(
    source: &Path,
    app_id: &str,
    table: &InstructionFormatTable,
) -> Result<Extraction, ExtractError> {
    let mut artifact = detect_artifact_kind(source)?;
    artifact.id = app_id.to_string();
    extract_artifact(&artifact, table)
}
